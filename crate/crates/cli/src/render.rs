//! Text and JSON renderings of a localization report. Both carry exactly
//! the same coordinate sets.

use locfaults_core::engine::{PruneReason, PrunedDeviation};
use serde_json::json;

use crate::run::RunOutcome;

fn mcs_list(mcss: &[locfaults_core::mcs::Mcs]) -> String {
    if mcss.is_empty() {
        return "(none)".to_string();
    }
    mcss.iter()
        .map(|m| m.render())
        .collect::<Vec<_>>()
        .join(",")
}

fn prune_reason(p: &PrunedDeviation) -> String {
    match &p.reason {
        PruneReason::NonCorrecting => "non-correcting".to_string(),
        PruneReason::NonMinimal { subsumed_by } => {
            format!("non-minimal (contains {{{}}})", subsumed_by.join(","))
        }
        PruneReason::Marked { node, mark, size } => {
            format!("mark({node})={mark} < {size}")
        }
        PruneReason::Abandoned { why } => format!("abandoned: {why}"),
    }
}

pub fn render_text(out: &RunOutcome) -> String {
    let r = &out.report;
    let mut s = String::new();
    s.push_str(&format!(
        "program {} ({})\n",
        out.program_name,
        out.source.display()
    ));
    s.push_str(&format!(
        "counterexample {}  b={} b_mcd={} b_mcs={} marking={}\n",
        out.ce.render(),
        out.b,
        out.b_mcd,
        out.b_mcs,
        if out.marking { "on" } else { "off" }
    ));
    s.push_str(&format!(
        "P {:.3}s  L {:.3}s\n",
        r.pretreatment_secs, r.localization_secs
    ));
    s.push_str(&format!("MCD {{}} : {}\n", mcs_list(&r.ce_path_mcss)));
    for mcd in &r.mcds {
        s.push_str(&format!(
            "MCD {{{}}} : {}\n",
            mcd.coords.join(","),
            mcs_list(&mcd.mcss)
        ));
    }
    for p in &r.pruned {
        s.push_str(&format!(
            "pruned {{{}}} : {}\n",
            p.coords.join(","),
            prune_reason(p)
        ));
    }
    s.push_str(&format!("explored deviations: {}\n", r.explored_deviations));
    s
}

pub fn render_json(out: &RunOutcome) -> serde_json::Value {
    let r = &out.report;
    json!({
        "schema": 1,
        "program": out.program_name,
        "source": out.source.display().to_string(),
        "counterexample": out.ce.to_json(),
        "b": out.b,
        "bMcd": out.b_mcd,
        "bMcs": out.b_mcs,
        "marking": out.marking,
        "cePathMcss": r.ce_path_mcss.iter().map(|m| m.coords.clone()).collect::<Vec<_>>(),
        "mcds": r.mcds.iter().map(|m| json!({
            "deviation": m.coords,
            "mcss": m.mcss.iter().map(|x| x.coords.clone()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "pruned": r.pruned.iter().map(|p| json!({
            "deviation": p.coords,
            "reason": prune_reason(p),
        })).collect::<Vec<_>>(),
        "exploredDeviations": r.explored_deviations,
        "timings": {
            "pretreatmentSecs": r.pretreatment_secs,
            "localizationSecs": r.localization_secs,
        },
    })
}
