//! Bounds propagation and depth-first search.

use std::time::Instant;

use super::{CmpOp, Domain, Formula, Limits, LinExpr, Model, Problem, SolveResult, SolverError, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Trool {
    True,
    False,
    Unknown,
}

struct Failed;

struct State<'a> {
    constraints: Vec<&'a Formula>,
    lo: Vec<i64>,
    hi: Vec<i64>,
    trail: Vec<(usize, i64, i64)>,
    /// constraint indices watching each variable
    watchers: Vec<Vec<u32>>,
    /// scratch for the propagation worklist
    queued: Vec<bool>,
    queue: std::collections::VecDeque<u32>,
}

struct Frame {
    mark: usize,
    var: usize,
    /// Right branch resumes at `resume_lo` (`x >= resume_lo`).
    resume_lo: i64,
}

pub(crate) fn search(
    problem: &Problem,
    extra: &[Formula],
    limits: &Limits,
) -> Result<SolveResult, SolverError> {
    let constraints: Vec<&Formula> = problem.constraints.iter().chain(extra.iter()).collect();
    let mut watchers: Vec<Vec<u32>> = vec![Vec::new(); problem.domains.len()];
    for (ci, c) in constraints.iter().enumerate() {
        let mut seen = std::collections::BTreeSet::new();
        c.for_each_var(&mut |v: VarId| {
            if seen.insert(v) {
                watchers[v.index()].push(ci as u32);
            }
        });
    }
    let queued = vec![false; constraints.len()];
    let mut st = State {
        constraints,
        lo: problem.domains.iter().map(|d| d.lo).collect(),
        hi: problem.domains.iter().map(|d| d.hi).collect(),
        trail: Vec::new(),
        watchers,
        queued,
        queue: std::collections::VecDeque::new(),
    };
    let start = Instant::now();
    let mut nodes: u64 = 0;
    let mut frames: Vec<Frame> = Vec::new();

    if st.propagate_full().is_err() {
        return Ok(SolveResult::Unsat);
    }

    loop {
        nodes += 1;
        if nodes > limits.max_nodes || (nodes % 4096 == 0 && start.elapsed().as_millis() as u64 > limits.max_millis)
        {
            return Err(SolverError::ResourceLimit {
                nodes,
                millis: start.elapsed().as_millis() as u64,
            });
        }

        // decide: assign small domains, bisect wide ones (lower half
        // first, so values are still explored lowest-first)
        match st.pick_var() {
            None => {
                return Ok(SolveResult::Sat(Model { values: st.lo.clone() }));
            }
            Some(var) => {
                let (lo, hi) = (st.lo[var], st.hi[var]);
                let upper = if hi - lo <= 8 { lo } else { lo + (hi - lo) / 2 };
                frames.push(Frame { mark: st.trail.len(), var, resume_lo: upper + 1 });
                let ok = st.set_hi(var, upper).is_ok() && st.propagate_from(var).is_ok();
                if ok {
                    continue;
                }
            }
        }

        // unwind to the most recent frame with an untried right branch
        loop {
            let Some(frame) = frames.pop() else {
                return Ok(SolveResult::Unsat);
            };
            st.restore(frame.mark);
            nodes += 1;
            if frame.resume_lo <= st.hi[frame.var] {
                let ok = st.set_lo(frame.var, frame.resume_lo).is_ok()
                    && st.propagate_from(frame.var).is_ok();
                if ok {
                    break;
                }
            }
        }
    }
}

impl<'a> State<'a> {
    fn restore(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (v, lo, hi) = self.trail.pop().unwrap();
            self.lo[v] = lo;
            self.hi[v] = hi;
        }
    }

    fn set_lo(&mut self, var: usize, new: i64) -> Result<bool, Failed> {
        if new <= self.lo[var] {
            return Ok(false);
        }
        if new > self.hi[var] {
            return Err(Failed);
        }
        self.trail.push((var, self.lo[var], self.hi[var]));
        self.lo[var] = new;
        Ok(true)
    }

    fn set_hi(&mut self, var: usize, new: i64) -> Result<bool, Failed> {
        if new >= self.hi[var] {
            return Ok(false);
        }
        if new < self.lo[var] {
            return Err(Failed);
        }
        self.trail.push((var, self.lo[var], self.hi[var]));
        self.hi[var] = new;
        Ok(true)
    }

    fn rng(&self, v: VarId) -> (i64, i64) {
        (self.lo[v.index()], self.hi[v.index()])
    }

    fn fixed(&self, v: VarId) -> Option<i64> {
        let (l, h) = self.rng(v);
        (l == h).then_some(l)
    }

    /// First-fail: smallest domain, lowest index on ties.
    fn pick_var(&self) -> Option<usize> {
        let mut best: Option<(i64, usize)> = None;
        for v in 0..self.lo.len() {
            let width = self.hi[v] - self.lo[v];
            if width == 0 {
                continue;
            }
            if best.map(|(w, _)| width < w).unwrap_or(true) {
                best = Some((width, v));
            }
        }
        best.map(|(_, v)| v)
    }

    fn propagate_full(&mut self) -> Result<(), Failed> {
        for ci in 0..self.constraints.len() as u32 {
            if !self.queued[ci as usize] {
                self.queued[ci as usize] = true;
                self.queue.push_back(ci);
            }
        }
        self.propagate_queue()
    }

    fn propagate_from(&mut self, var: usize) -> Result<(), Failed> {
        for i in 0..self.watchers[var].len() {
            let ci = self.watchers[var][i];
            if !self.queued[ci as usize] {
                self.queued[ci as usize] = true;
                self.queue.push_back(ci);
            }
        }
        self.propagate_queue()
    }

    /// Worklist fixpoint: when a constraint narrows a variable, every
    /// constraint watching that variable is re-run. On failure the worklist
    /// drains so the next call starts clean.
    fn propagate_queue(&mut self) -> Result<(), Failed> {
        while let Some(ci) = self.queue.pop_front() {
            self.queued[ci as usize] = false;
            let mark = self.trail.len();
            let formula = self.constraints[ci as usize];
            if self.enforce(formula).is_err() {
                while let Some(ci) = self.queue.pop_front() {
                    self.queued[ci as usize] = false;
                }
                return Err(Failed);
            }
            for t in mark..self.trail.len() {
                let var = self.trail[t].0;
                for i in 0..self.watchers[var].len() {
                    let wi = self.watchers[var][i];
                    if !self.queued[wi as usize] {
                        self.queued[wi as usize] = true;
                        self.queue.push_back(wi);
                    }
                }
            }
        }
        Ok(())
    }

    // ---- interval evaluation -------------------------------------------

    fn lin_bounds(&self, lin: &LinExpr) -> (i64, i64) {
        let mut lo = lin.constant;
        let mut hi = lin.constant;
        for (c, v) in &lin.terms {
            let (vl, vh) = self.rng(*v);
            let (a, b) = (c.saturating_mul(vl), c.saturating_mul(vh));
            lo = lo.saturating_add(a.min(b));
            hi = hi.saturating_add(a.max(b));
        }
        (lo, hi)
    }

    pub(crate) fn eval(&self, f: &Formula) -> Trool {
        match f {
            Formula::Cmp { op, lin } => {
                let (lo, hi) = self.lin_bounds(lin);
                match op {
                    CmpOp::Eq => {
                        if lo == 0 && hi == 0 {
                            Trool::True
                        } else if hi < 0 || lo > 0 {
                            Trool::False
                        } else {
                            Trool::Unknown
                        }
                    }
                    CmpOp::Ne => {
                        if lo == 0 && hi == 0 {
                            Trool::False
                        } else if hi < 0 || lo > 0 {
                            Trool::True
                        } else {
                            Trool::Unknown
                        }
                    }
                    CmpOp::Le => tri(hi <= 0, lo > 0),
                    CmpOp::Lt => tri(hi < 0, lo >= 0),
                    CmpOp::Ge => tri(lo >= 0, hi < 0),
                    CmpOp::Gt => tri(lo > 0, hi <= 0),
                }
            }
            Formula::Product { z, x, y } => {
                let (pl, ph) = mul_interval(self.rng(*x), self.rng(*y));
                let (zl, zh) = self.rng(*z);
                if zh < pl || zl > ph {
                    return Trool::False;
                }
                match (self.fixed(*x), self.fixed(*y), self.fixed(*z)) {
                    (Some(a), Some(b), Some(c)) => tri(a * b == c, a * b != c),
                    _ => Trool::Unknown,
                }
            }
            Formula::ElementRead { out, cells, index } => {
                let (il, ih) = self.rng(*index);
                let (il, ih) = (il.max(0), ih.min(cells.len() as i64 - 1));
                if il > ih {
                    return Trool::False;
                }
                let (ol, oh) = self.rng(*out);
                let mut any_overlap = false;
                for j in il..=ih {
                    let (cl, ch) = self.rng(cells[j as usize]);
                    if ch >= ol && cl <= oh {
                        any_overlap = true;
                        break;
                    }
                }
                if !any_overlap {
                    return Trool::False;
                }
                if il == ih {
                    let c = cells[il as usize];
                    if let (Some(a), Some(b)) = (self.fixed(*out), self.fixed(c)) {
                        return tri(a == b, a != b);
                    }
                }
                Trool::Unknown
            }
            Formula::ElementWrite { out, base, index, value } => {
                let (il, ih) = self.rng(*index);
                let (il, ih) = (il.max(0), ih.min(base.len() as i64 - 1));
                if il > ih {
                    return Trool::False;
                }
                let mut all_fixed = self.fixed(*index).is_some() && self.fixed(*value).is_some();
                for j in 0..out.len() {
                    all_fixed &=
                        self.fixed(out[j]).is_some() && self.fixed(base[j]).is_some();
                }
                if all_fixed {
                    let values: Vec<i64> = (0..self.lo.len()).map(|v| self.lo[v]).collect();
                    return tri(f.check(&values), !f.check(&values));
                }
                Trool::Unknown
            }
            Formula::And(fs) => {
                let mut out = Trool::True;
                for g in fs {
                    match self.eval(g) {
                        Trool::False => return Trool::False,
                        Trool::Unknown => out = Trool::Unknown,
                        Trool::True => {}
                    }
                }
                out
            }
            Formula::Or(fs) => {
                let mut out = Trool::False;
                for g in fs {
                    match self.eval(g) {
                        Trool::True => return Trool::True,
                        Trool::Unknown => out = Trool::Unknown,
                        Trool::False => {}
                    }
                }
                out
            }
            Formula::Not(inner) => match self.eval(inner) {
                Trool::True => Trool::False,
                Trool::False => Trool::True,
                Trool::Unknown => Trool::Unknown,
            },
            Formula::Reified { var, inner, .. } => match (self.fixed(*var), self.eval(inner)) {
                (Some(1), t) => t,
                (Some(_), Trool::True) => Trool::False,
                (Some(_), Trool::False) => Trool::True,
                _ => Trool::Unknown,
            },
            Formula::AtMostFalse { vars, k } => {
                let mut zeros = 0u32;
                let mut unknown = 0u32;
                for v in vars {
                    match self.fixed(*v) {
                        Some(0) => zeros += 1,
                        Some(_) => {}
                        None => unknown += 1,
                    }
                }
                if zeros > *k {
                    Trool::False
                } else if zeros + unknown <= *k {
                    Trool::True
                } else {
                    Trool::Unknown
                }
            }
        }
    }

    // ---- propagation ----------------------------------------------------

    fn enforce(&mut self, f: &Formula) -> Result<bool, Failed> {
        match f {
            Formula::Cmp { op, lin } => self.enforce_cmp(*op, lin),
            Formula::Product { z, x, y } => self.enforce_product(*z, *x, *y),
            Formula::ElementRead { out, cells, index } => {
                self.enforce_element_read(*out, cells, *index)
            }
            Formula::ElementWrite { out, base, index, value } => {
                self.enforce_element_write(out, base, *index, *value)
            }
            Formula::And(fs) => {
                let mut changed = false;
                for g in fs {
                    changed |= self.enforce(g)?;
                }
                Ok(changed)
            }
            Formula::Or(fs) => {
                let mut unknown = None;
                let mut unknown_count = 0;
                for g in fs {
                    match self.eval(g) {
                        Trool::True => return Ok(false),
                        Trool::Unknown => {
                            unknown = Some(g);
                            unknown_count += 1;
                        }
                        Trool::False => {}
                    }
                }
                match (unknown_count, unknown) {
                    (0, _) => Err(Failed),
                    (1, Some(g)) => self.enforce(g),
                    _ => Ok(false),
                }
            }
            Formula::Not(inner) => match self.eval(inner) {
                Trool::True => Err(Failed),
                _ => Ok(false),
            },
            Formula::Reified { var, inner, inner_neg } => {
                match self.fixed(*var) {
                    Some(1) => self.enforce(inner),
                    Some(_) => self.enforce(inner_neg),
                    None => match self.eval(inner) {
                        Trool::True => self.set_lo(var.index(), 1),
                        Trool::False => self.set_hi(var.index(), 0),
                        Trool::Unknown => Ok(false),
                    },
                }
            }
            Formula::AtMostFalse { vars, k } => {
                let mut zeros = 0u32;
                for v in vars {
                    if self.fixed(*v) == Some(0) {
                        zeros += 1;
                    }
                }
                if zeros > *k {
                    return Err(Failed);
                }
                let mut changed = false;
                if zeros == *k {
                    for v in vars {
                        if self.fixed(*v).is_none() {
                            changed |= self.set_lo(v.index(), 1)?;
                        }
                    }
                }
                Ok(changed)
            }
        }
    }

    fn enforce_cmp(&mut self, op: CmpOp, lin: &LinExpr) -> Result<bool, Failed> {
        match op {
            CmpOp::Le => self.tighten_le(lin, 1, 0),
            CmpOp::Lt => self.tighten_le(lin, 1, 1),
            CmpOp::Ge => self.tighten_le(lin, -1, 0),
            CmpOp::Gt => self.tighten_le(lin, -1, 1),
            CmpOp::Eq => {
                let mut changed = self.tighten_le(lin, 1, 0)?;
                changed |= self.tighten_le(lin, -1, 0)?;
                Ok(changed)
            }
            CmpOp::Ne => {
                let (lo, hi) = self.lin_bounds(lin);
                if lo == 0 && hi == 0 {
                    return Err(Failed);
                }
                // with a single unfixed variable, trim a forbidden endpoint
                let mut unfixed = None;
                let mut rest = lin.constant;
                for (c, v) in &lin.terms {
                    match self.fixed(*v) {
                        Some(val) => rest += c * val,
                        None => {
                            if unfixed.replace((*c, *v)).is_some() {
                                return Ok(false);
                            }
                        }
                    }
                }
                if let Some((c, v)) = unfixed {
                    // c*x + rest != 0
                    if rest % c == 0 {
                        let forbidden = -rest / c;
                        let (vl, vh) = self.rng(v);
                        if forbidden == vl && forbidden == vh {
                            return Err(Failed);
                        }
                        if forbidden == vl {
                            return self.set_lo(v.index(), forbidden + 1);
                        }
                        if forbidden == vh {
                            return self.set_hi(v.index(), forbidden - 1);
                        }
                    }
                }
                Ok(false)
            }
        }
    }

    /// Propagate `sign*lin + shift <= 0` without allocating.
    fn tighten_le(&mut self, lin: &LinExpr, sign: i64, shift: i64) -> Result<bool, Failed> {
        let mut lo = sign * lin.constant + shift;
        for (c, v) in &lin.terms {
            let c = sign * c;
            let (vl, vh) = self.rng(*v);
            let (a, b) = (c.saturating_mul(vl), c.saturating_mul(vh));
            lo = lo.saturating_add(a.min(b));
        }
        if lo > 0 {
            return Err(Failed);
        }
        let mut changed = false;
        for (c, v) in &lin.terms {
            let c = sign * c;
            let (vl, vh) = self.rng(*v);
            let (a, b) = (c.saturating_mul(vl), c.saturating_mul(vh));
            let rest_lo = lo.saturating_sub(a.min(b));
            // c*x <= -rest_lo
            let bound = -rest_lo;
            if c > 0 {
                changed |= self.set_hi(v.index(), div_floor(bound, c))?;
            } else {
                changed |= self.set_lo(v.index(), div_ceil(bound, c))?;
            }
        }
        Ok(changed)
    }

    fn enforce_product(&mut self, z: VarId, x: VarId, y: VarId) -> Result<bool, Failed> {
        let mut changed = false;
        let (pl, ph) = mul_interval(self.rng(x), self.rng(y));
        changed |= self.set_lo(z.index(), pl)?;
        changed |= self.set_hi(z.index(), ph)?;

        if x == y {
            // square: z >= 0 and |x| <= isqrt(z.hi)
            changed |= self.set_lo(z.index(), 0)?;
            let (_, zh) = self.rng(z);
            let r = isqrt(zh);
            changed |= self.set_lo(x.index(), -r)?;
            changed |= self.set_hi(x.index(), r)?;
            return Ok(changed);
        }

        // factor inverse when the other side's interval excludes zero
        changed |= self.divide_into(x, z, y)?;
        changed |= self.divide_into(y, z, x)?;
        Ok(changed)
    }

    /// Tighten `target` towards `z / other` with outward rounding; only
    /// applicable when `other` cannot be zero.
    fn divide_into(&mut self, target: VarId, z: VarId, other: VarId) -> Result<bool, Failed> {
        let (ol, oh) = self.rng(other);
        if ol <= 0 && oh >= 0 {
            return Ok(false);
        }
        let (zl, zh) = self.rng(z);
        let corners = [(zl, ol), (zl, oh), (zh, ol), (zh, oh)];
        let lo = corners.iter().map(|(a, b)| div_floor(*a, *b)).min().unwrap();
        let hi = corners.iter().map(|(a, b)| div_ceil(*a, *b)).max().unwrap();
        let mut changed = false;
        changed |= self.set_lo(target.index(), lo)?;
        changed |= self.set_hi(target.index(), hi)?;
        Ok(changed)
    }

    fn enforce_element_read(
        &mut self,
        out: VarId,
        cells: &[VarId],
        index: VarId,
    ) -> Result<bool, Failed> {
        let mut changed = false;
        changed |= self.set_lo(index.index(), 0)?;
        changed |= self.set_hi(index.index(), cells.len() as i64 - 1)?;

        let (ol, oh) = self.rng(out);
        // shrink the index range past cells that cannot match out
        loop {
            let (il, ih) = self.rng(index);
            let (cl, ch) = self.rng(cells[il as usize]);
            if ch < ol || cl > oh {
                if il == ih {
                    return Err(Failed);
                }
                changed |= self.set_lo(index.index(), il + 1)?;
            } else {
                break;
            }
        }
        loop {
            let (il, ih) = self.rng(index);
            let (cl, ch) = self.rng(cells[ih as usize]);
            if ch < ol || cl > oh {
                if il == ih {
                    return Err(Failed);
                }
                changed |= self.set_hi(index.index(), ih - 1)?;
            } else {
                break;
            }
        }

        let (il, ih) = self.rng(index);
        if il == ih {
            let c = cells[il as usize];
            let (cl, ch) = self.rng(c);
            changed |= self.set_lo(out.index(), cl)?;
            changed |= self.set_hi(out.index(), ch)?;
            let (ol, oh) = self.rng(out);
            changed |= self.set_lo(c.index(), ol)?;
            changed |= self.set_hi(c.index(), oh)?;
        } else {
            let mut hl = i64::MAX;
            let mut hh = i64::MIN;
            for j in il..=ih {
                let (cl, ch) = self.rng(cells[j as usize]);
                hl = hl.min(cl);
                hh = hh.max(ch);
            }
            changed |= self.set_lo(out.index(), hl)?;
            changed |= self.set_hi(out.index(), hh)?;
        }
        Ok(changed)
    }

    fn enforce_element_write(
        &mut self,
        out: &[VarId],
        base: &[VarId],
        index: VarId,
        value: VarId,
    ) -> Result<bool, Failed> {
        let mut changed = false;
        changed |= self.set_lo(index.index(), 0)?;
        changed |= self.set_hi(index.index(), base.len() as i64 - 1)?;
        let (il, ih) = self.rng(index);
        for j in 0..base.len() as i64 {
            if j < il || j > ih {
                changed |= self.eq_tighten(out[j as usize], base[j as usize])?;
            } else if il == ih {
                changed |= self.eq_tighten(out[j as usize], value)?;
            } else {
                // out[j] is base[j] or value: hull
                let (bl, bh) = self.rng(base[j as usize]);
                let (vl, vh) = self.rng(value);
                changed |= self.set_lo(out[j as usize].index(), bl.min(vl))?;
                changed |= self.set_hi(out[j as usize].index(), bh.max(vh))?;
            }
        }
        Ok(changed)
    }

    fn eq_tighten(&mut self, a: VarId, b: VarId) -> Result<bool, Failed> {
        let mut changed = false;
        let (al, ah) = self.rng(a);
        let (bl, bh) = self.rng(b);
        changed |= self.set_lo(a.index(), bl)?;
        changed |= self.set_hi(a.index(), bh)?;
        changed |= self.set_lo(b.index(), al)?;
        changed |= self.set_hi(b.index(), ah)?;
        Ok(changed)
    }
}

fn tri(is_true: bool, is_false: bool) -> Trool {
    if is_true {
        Trool::True
    } else if is_false {
        Trool::False
    } else {
        Trool::Unknown
    }
}

fn mul_interval((al, ah): (i64, i64), (bl, bh): (i64, i64)) -> (i64, i64) {
    let candidates = [
        al.saturating_mul(bl),
        al.saturating_mul(bh),
        ah.saturating_mul(bl),
        ah.saturating_mul(bh),
    ];
    (
        *candidates.iter().min().unwrap(),
        *candidates.iter().max().unwrap(),
    )
}

fn isqrt(v: i64) -> i64 {
    if v < 0 {
        return 0;
    }
    let mut r = (v as f64).sqrt() as i64;
    while r.saturating_mul(r) > v {
        r -= 1;
    }
    while (r + 1).saturating_mul(r + 1) <= v {
        r += 1;
    }
    r
}

fn div_floor(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

/// Used by [`Problem::solve`]'s callers in tests.
#[allow(dead_code)]
pub(crate) fn domain_of(d: &Domain) -> (i64, i64) {
    (d.lo, d.hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn div_rounding() {
        assert_eq!(div_floor(7, 2), 3);
        assert_eq!(div_floor(-7, 2), -4);
        assert_eq!(div_floor(7, -2), -4);
        assert_eq!(div_ceil(7, 2), 4);
        assert_eq!(div_ceil(-7, 2), -3);
        assert_eq!(div_ceil(-7, -2), 4);
    }

    #[test]
    fn mul_interval_covers_signs() {
        assert_eq!(mul_interval((-2, 3), (4, 5)), (-10, 15));
        assert_eq!(mul_interval((-2, -1), (-3, -2)), (2, 6));
        assert_eq!(mul_interval((-2, 3), (-4, 5)), (-12, 15));
    }
}
