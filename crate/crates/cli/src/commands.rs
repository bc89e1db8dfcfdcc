use std::fmt::Write as _;
use std::path::Path;

use bellforge::catalog::{self, ghz, w_state};
use bellforge::construct::{
    family_442, family_triple, find_sign_flips, generating_inequality, identify_settings, reduce_factorable,
    InequalityCoefficients, MergeMap, SignFunction, FAMILY_442_SIZE,
};
use bellforge::criterion::{
    multisetting_criterion, quantum_max, standard_sufficient_value, wwzb_max, CriterionResult,
};
use bellforge::io::{self, InequalityFile};
use bellforge::optim::SearchOptions;
use bellforge::oracle::{certify, classical_bound};
use bellforge::quantum::QuantumState;
use bellforge::{Error, Result};
use serde_json::{json, Value};

use crate::report::RunReport;
use crate::{Command, Family, InequalityCommand, Mode, SearchArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Tensor { state, out } => cmd_tensor(&state, out.as_deref()),
        Command::Inequality(sub) => cmd_inequality(sub),
        Command::Certify { ineq } => cmd_certify(&ineq),
        Command::Bound { ineq } => cmd_bound(&ineq),
        Command::Criterion { state, mode, search, json } => cmd_criterion(&state, mode, search, json),
        Command::QuantumMax { ineq, state, search } => cmd_quantum_max(&ineq, &state, search),
        Command::Scan { family, parties, alphas, alpha_grid, modes, search, out } => {
            let alphas = match alpha_grid {
                Some(g) => parse_grid(&g)?,
                None => alphas,
            };
            let csv = cmd_scan(family, &parties, &alphas, &modes, search)?;
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

/// A readable file, otherwise a catalog name.
fn load_state(source: &str) -> Result<QuantumState> {
    let path = Path::new(source);
    if path.is_file() {
        io::read_state(path)
    } else {
        Ok(catalog::resolve(source)?.state)
    }
}

fn search_options(search: SearchArgs) -> Result<SearchOptions> {
    if search.restarts == 0 {
        return Err(Error::InvalidArgument("--restarts must be at least 1".into()));
    }
    Ok(SearchOptions::new(search.restarts, search.seed))
}

fn cmd_tensor(state: &str, out: Option<&Path>) -> Result<()> {
    let tensor = load_state(state)?.correlation_tensor();
    let entries = io::tensor_entries(&tensor);
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&entries)? + "\n")?;
    }
    let report = RunReport::new(
        "tensor",
        json!({ "state": state }),
        json!({ "n_parties": tensor.n_parties(), "components": entries }),
        0,
    );
    println!("{}", report.to_json());
    Ok(())
}

fn summary(ineq: &InequalityCoefficients) -> String {
    format!(
        "profile {:?}, {} terms, declared bound {}",
        ineq.settings_per_party(),
        ineq.terms().len(),
        ineq.declared_bound()
    )
}

fn emit_inequality(ineq: &InequalityCoefficients, out: Option<&Path>, notes: &[String]) -> Result<()> {
    match out {
        Some(path) => {
            io::write_inequality(path, ineq)?;
            println!("wrote {}: {}", path.display(), summary(ineq));
            notes.iter().for_each(|n| println!("{n}"));
        }
        None => {
            println!("{}", io::inequality_to_json(ineq));
            eprintln!("{}", summary(ineq));
            notes.iter().for_each(|n| eprintln!("{n}"));
        }
    }
    Ok(())
}

/// How a family member relates to the three-party generating inequality.
fn family_class(signs: [SignFunction; 3]) -> String {
    let g3 = generating_inequality(3).expect("N = 3 is valid");
    let labels = signs.map(|s| if s.is_factorable() { "factorable" } else { "non-factorable" });
    let relation = match reduce_factorable(signs) {
        None => match find_sign_flips(&family_442(signs), &g3, 4.0) {
            Some(_) => "equals 4x the three-party generating inequality up to outcome sign flips".to_string(),
            None => "not related to the generating inequality by sign flips".to_string(),
        },
        Some(red) => format!(
            "setting identification {:?} of the member with sign functions {:?}",
            red.merge.parties,
            red.witness.map(|s| s.index())
        ),
    };
    format!("sign functions {:?} ({}); {relation}", signs.map(|s| s.index()), labels.join(", "))
}

fn cmd_inequality(sub: InequalityCommand) -> Result<()> {
    match sub {
        InequalityCommand::Gen { parties, out } => emit_inequality(&generating_inequality(parties)?, out.as_deref(), &[]),
        InequalityCommand::Family { index, signs, out } => {
            let triple = match (index, signs) {
                (Some(i), _) => family_triple(i)?,
                (None, Some(s)) => {
                    if s.len() != 3 {
                        return Err(Error::MalformedSignTree(format!("expected three sign functions, got {}", s.len())));
                    }
                    [SignFunction::from_index(s[0])?, SignFunction::from_index(s[1])?, SignFunction::from_index(s[2])?]
                }
                (None, None) => {
                    return Err(Error::InvalidArgument(format!("give --index in 0..{FAMILY_442_SIZE} or --signs")))
                }
            };
            emit_inequality(&family_442(triple), out.as_deref(), &[family_class(triple)])
        }
        InequalityCommand::Merge { ineq, map, out } => {
            let source = io::read_inequality(&ineq)?;
            let map: MergeMap = serde_json::from_str(&std::fs::read_to_string(map)?)?;
            emit_inequality(&identify_settings(&source, &map)?, out.as_deref(), &[])
        }
    }
}

fn cmd_bound(path: &Path) -> Result<()> {
    let ineq = io::read_inequality(path)?;
    let cb = classical_bound(&ineq)?;
    let report = RunReport::new(
        "bound",
        json!({ "ineq": InequalityFile::from_inequality(&ineq) }),
        json!({
            "bound": cb.bound,
            "exact_bound": cb.exact,
            "declared_bound": ineq.declared_bound(),
            "n_maximizers": cb.n_maximizers,
            "argmax": cb.argmax.outcomes(),
        }),
        0,
    );
    println!("{}", report.to_json());
    Ok(())
}

fn cmd_certify(path: &Path) -> Result<()> {
    let ineq = io::read_inequality(path)?;
    let cb = classical_bound(&ineq)?;
    let mut outputs = json!({
        "bound": cb.bound,
        "exact_bound": cb.exact,
        "declared_bound": ineq.declared_bound(),
        "declared_bound_certified": (cb.bound - ineq.declared_bound()).abs() <= 1e-9 * cb.bound.max(1.0),
        "ambient_dim": ineq.ambient_dim(),
    });
    match certify(&ineq) {
        Ok(r) => {
            let extra = json!({
                "n_saturating_pos": r.n_saturating_pos,
                "n_saturating_neg": r.n_saturating_neg,
                "rank": r.rank,
                "tight": r.tight,
            });
            merge_objects(&mut outputs, extra);
        }
        Err(e) if e.is_guard_refusal() => {
            log::warn!("tightness not certified: {e}");
            merge_objects(&mut outputs, json!({ "tight": Value::Null, "tightness_refused": e.to_string() }));
        }
        Err(e) => return Err(e),
    }
    let report = RunReport::new("certify", json!({ "ineq": InequalityFile::from_inequality(&ineq) }), outputs, 0);
    println!("{}", report.to_json());
    Ok(())
}

fn merge_objects(target: &mut Value, extra: Value) {
    if let (Value::Object(t), Value::Object(e)) = (target, extra) {
        t.extend(e);
    }
}

fn cmd_criterion(state: &str, mode: Mode, search: SearchArgs, json_out: bool) -> Result<()> {
    let opts = search_options(search)?;
    let tensor = load_state(state)?.correlation_tensor();
    let outputs = match mode {
        Mode::Multisetting => criterion_json(&multisetting_criterion(&tensor, &opts)?),
        Mode::Standard => criterion_json(&standard_sufficient_value(&tensor, &opts)?),
        Mode::Wwzb => {
            let r = wwzb_max(&tensor, &opts)?;
            json!({
                "value": r.value,
                "violation_factor": r.violation_factor(),
                "noise_threshold": r.noise_threshold(),
                "settings": r.settings,
            })
        }
    };
    let mode_name = format!("{mode:?}").to_lowercase();
    if json_out {
        let inputs = json!({ "state": state, "mode": mode_name, "restarts": search.restarts });
        println!("{}", RunReport::new("criterion", inputs, outputs, search.seed).to_json());
    } else {
        println!(
            "{state} {mode_name}: value {} violation factor {} noise threshold {}",
            outputs["value"], outputs["violation_factor"], outputs["noise_threshold"]
        );
    }
    Ok(())
}

fn criterion_json(r: &CriterionResult) -> Value {
    json!({
        "value": r.value,
        "violation_factor": r.violation_factor,
        "noise_threshold": r.noise_threshold,
        "frames": r.frames,
    })
}

fn cmd_quantum_max(ineq_path: &Path, state: &str, search: SearchArgs) -> Result<()> {
    let opts = search_options(search)?;
    let ineq = io::read_inequality(ineq_path)?;
    let tensor = load_state(state)?.correlation_tensor();
    let q = quantum_max(&ineq, &tensor, &opts)?;
    let outputs = json!({
        "value": q.value,
        "declared_bound": ineq.declared_bound(),
        "ratio": q.ratio(&ineq),
        "settings": q.settings,
    });
    let inputs = json!({
        "ineq": InequalityFile::from_inequality(&ineq),
        "state": state,
        "restarts": search.restarts,
    });
    println!("{}", RunReport::new("quantum-max", inputs, outputs, search.seed).to_json());
    Ok(())
}

/// `start:stop:count` with both ends included.
fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("bad grid {grid:?}; expected start:stop:count"));
    let parts: Vec<&str> = grid.split(':').collect();
    let [start, stop, count] = parts.as_slice() else { return Err(bad()) };
    let start: f64 = start.parse().map_err(|_| bad())?;
    let stop: f64 = stop.parse().map_err(|_| bad())?;
    let count: usize = count.parse().map_err(|_| bad())?;
    Ok(match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect(),
    })
}

fn cmd_scan(family: Family, parties: &[usize], alphas: &[f64], modes: &[Mode], search: SearchArgs) -> Result<String> {
    let opts = search_options(search)?;
    let points: Vec<(usize, Option<f64>)> = match family {
        Family::Ghz => parties.iter().flat_map(|&n| alphas.iter().map(move |&a| (n, Some(a)))).collect(),
        Family::W => parties.iter().map(|&n| (n, None)).collect(),
    };
    if points.is_empty() {
        return Err(Error::InvalidArgument("scan grid is empty".into()));
    }
    let mut csv = String::from(
        "family,n_parties,alpha,multisetting,multisetting_threshold,standard,standard_threshold,wwzb,wwzb_threshold\n",
    );
    let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for (n, alpha) in points {
        let entry = match alpha {
            Some(a) => ghz(n, a)?,
            None => w_state(n)?,
        };
        let tensor = entry.state.correlation_tensor();
        let mut row = [None; 6];
        if modes.contains(&Mode::Multisetting) {
            let r = multisetting_criterion(&tensor, &opts)?;
            row[0] = Some(r.value);
            row[1] = Some(r.noise_threshold);
        }
        if modes.contains(&Mode::Standard) {
            let r = standard_sufficient_value(&tensor, &opts)?;
            row[2] = Some(r.value);
            row[3] = Some(r.noise_threshold);
        }
        if modes.contains(&Mode::Wwzb) {
            let r = wwzb_max(&tensor, &opts)?;
            row[4] = Some(r.value);
            row[5] = Some(r.noise_threshold());
        }
        let family_name = match family {
            Family::Ghz => "ghz",
            Family::W => "w",
        };
        write!(csv, "{family_name},{n},{}", cell(alpha)).expect("string write");
        for v in row {
            write!(csv, ",{}", cell(v)).expect("string write");
        }
        csv.push('\n');
    }
    Ok(csv)
}
