use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use clap::Args;
use serde_json::{json, Value};
use thiserror::Error;

use holostring::anomaly::{self, Edge, WheelSpec};
use holostring::exactlin::{format_rational, int, parse_rational, rat, Rational};
use holostring::gelfandfuks::{self, CEModuleSpec, GfError, TruncatedW1};
use holostring::grr::{self, SheafSpec};
use holostring::vertexalg::{orbit_representatives, BasisWindow, FreeSystemSpec, StateMonomial, Statistics, VertexError};

use crate::parse_range;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Engine(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<VertexError> for CliError {
    fn from(e: VertexError) -> Self {
        match e {
            VertexError::InvalidSpec(_) | VertexError::InfiniteWindow(..) | VertexError::NoGhostPair => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Engine(other.to_string()),
        }
    }
}

impl From<GfError> for CliError {
    fn from(e: GfError) -> Self {
        match e {
            GfError::Cutoff { .. } | GfError::Argument(_) | GfError::Degree { .. } => CliError::Usage(e.to_string()),
            other => CliError::Engine(other.to_string()),
        }
    }
}

impl From<anomaly::AnomalyError> for CliError {
    fn from(e: anomaly::AnomalyError) -> Self {
        match e {
            anomaly::AnomalyError::Argument(_) => CliError::Usage(e.to_string()),
            other => CliError::Engine(other.to_string()),
        }
    }
}

impl From<grr::GrrError> for CliError {
    fn from(e: grr::GrrError) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type Row = BTreeMap<String, String>;

pub struct Report {
    pub json: Value,
    pub rows: Vec<Row>,
    pub passed: bool,
    pub summary: String,
}

fn row(table: &str, fields: &[(&str, String)]) -> Row {
    let mut r: Row = fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    r.insert("table".into(), table.into());
    r
}

fn q(x: &Rational) -> String {
    format_rational(x)
}

fn usage(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        Err(CliError::Usage(msg.to_string()))
    } else {
        Ok(())
    }
}

pub fn central_charge(dimv: usize, n_range: RangeInclusive<i64>) -> Result<Report, CliError> {
    usage(*n_range.start() < 0, "n-range must be non-negative (tensor weight n ≥ 0)")?;
    let mut entries: Vec<(String, Rational, Rational)> = vec![
        ("bc".into(), FreeSystemSpec::bc().central_charge(), int(-26)),
        ("beta_gamma".into(), FreeSystemSpec::beta_gamma(1).central_charge(), int(2)),
        (
            format!("string(d={dimv})"),
            FreeSystemSpec::string(dimv).central_charge(),
            int(2 * dimv as i64 - 26),
        ),
    ];
    for n in n_range {
        for (stats, sign, label) in [(Statistics::Bosonic, 1, "bosonic"), (Statistics::Fermionic, -1, "fermionic")] {
            entries.push((
                format!("{label}_pair(n={n})"),
                FreeSystemSpec::weighted_pair(n, stats).central_charge(),
                int(sign * 2 * (6 * n * n + 6 * n + 1)),
            ));
        }
    }
    let passed = entries.iter().all(|(_, c, e)| c == e);
    let rows = entries
        .iter()
        .map(|(s, c, e)| row("central_charge", &[("system", s.clone()), ("central_charge", q(c)), ("expected", q(e))]))
        .collect();
    let json = json!({
        "central_charges": entries.iter().map(|(s, c, e)| json!({"system": s, "central_charge": q(c), "expected": q(e)})).collect::<Vec<_>>(),
    });
    Ok(Report { json, rows, passed, summary: format!("{} central charges", entries.len()) })
}

#[derive(Args, Debug)]
pub struct BrstArgs {
    #[arg(long, default_value_t = 13)]
    dimv: usize,
    #[arg(long, default_value_t = 3)]
    max_weight: i64,
    /// Ghost stress-tensor coefficient.
    #[arg(long, default_value = "1/2")]
    kappa: String,
    #[arg(long, default_value = "-5..6", value_parser = parse_range)]
    ghost_range: RangeInclusive<i64>,
    #[arg(long, default_value = "-2..2", value_parser = parse_range)]
    charge_range: RangeInclusive<i64>,
    /// Cohomology is computed at weights `-1..=W` once Q² = 0 holds.
    #[arg(long, default_value_t = 0)]
    cohomology_max_weight: i64,
    #[arg(long, default_value = "-1..1", value_parser = parse_range)]
    cohomology_charge_range: RangeInclusive<i64>,
    #[arg(long)]
    skip_cohomology: bool,
    /// Expect Q² ≠ 0 (off the critical dimension); the exit code then
    /// reports whether the failure was observed.
    #[arg(long)]
    expect_failure: bool,
}

pub fn brst(a: &BrstArgs) -> Result<Report, CliError> {
    usage(a.dimv == 0, "dimv must be at least 1")?;
    usage(a.max_weight < -1, "max-weight must be at least -1")?;
    let kappa = parse_rational(&a.kappa).map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = FreeSystemSpec::string(a.dimv);
    let brst = spec.brst(&kappa)?;
    let window = BasisWindow::up_to(a.max_weight, a.ghost_range.clone(), a.charge_range.clone());
    let reps = orbit_representatives(&spec, &window)?;
    let mut blocks: BTreeMap<(i64, i64, i64), Vec<StateMonomial>> = BTreeMap::new();
    for m in reps {
        blocks.entry(spec.grading(&m)).or_default().push(m);
    }
    let mut rows = Vec::new();
    let mut table = Vec::new();
    let (mut failures, mut states, mut grading_ok) = (0, 0, true);
    for ((w, g, c), ms) in &blocks {
        let r = brst.nilpotency_report(ms);
        failures += r.failures;
        states += r.states_checked;
        grading_ok &= r.grading_ok;
        rows.push(row(
            "q_squared",
            &[
                ("weight", w.to_string()),
                ("ghost", g.to_string()),
                ("charge", c.to_string()),
                ("states", r.states_checked.to_string()),
                ("failures", r.failures.to_string()),
            ],
        ));
        table.push(json!({"weight": w, "ghost": g, "charge": c, "report": r}));
    }
    let nilpotent = failures == 0;
    let mut cohomology = Vec::new();
    if nilpotent && !a.skip_cohomology {
        for w in -1..=a.cohomology_max_weight {
            for g in a.ghost_range.clone() {
                for c in a.cohomology_charge_range.clone() {
                    let b = brst.cohomology(w, g, c)?;
                    if b.block_size == 0 {
                        continue;
                    }
                    rows.push(row(
                        "cohomology",
                        &[
                            ("weight", w.to_string()),
                            ("ghost", g.to_string()),
                            ("charge", c.to_string()),
                            ("block_size", b.block_size.to_string()),
                            ("dimension", b.dimension.to_string()),
                        ],
                    ));
                    cohomology.push(json!({
                        "weight": w, "ghost": g, "charge": c,
                        "block_size": b.block_size, "dimension": b.dimension,
                    }));
                }
            }
        }
    }
    let passed = grading_ok && (nilpotent != a.expect_failure);
    let json = json!({
        "dimv": a.dimv,
        "kappa": q(&kappa),
        "max_weight": a.max_weight,
        "ghost_range": [a.ghost_range.start(), a.ghost_range.end()],
        "charge_range": [a.charge_range.start(), a.charge_range.end()],
        "orbit_representatives": states,
        "q_squared_failures": failures,
        "nilpotent": nilpotent,
        "grading_ok": grading_ok,
        "expect_failure": a.expect_failure,
        "q_squared": table,
        "cohomology": cohomology,
    });
    let summary = format!(
        "d={} Q² {} on {states} orbit representatives ({failures} failures){}",
        a.dimv,
        if nilpotent { "= 0" } else { "≠ 0" },
        if a.expect_failure { ", failure expected" } else { "" },
    );
    Ok(Report { json, rows, passed, summary })
}

#[derive(Args, Debug)]
pub struct GerstenhaberArgs {
    #[arg(long, default_value_t = 13)]
    dimv: usize,
    /// Number of matter flavors kept in weight-zero blocks.
    #[arg(long, default_value_t = 2)]
    flavor_cap: usize,
    #[arg(long, default_value = "0..3", value_parser = parse_range)]
    ghost_range: RangeInclusive<i64>,
    #[arg(long, default_value = "-1..1", value_parser = parse_range)]
    charge_range: RangeInclusive<i64>,
    /// Weight bound for the `{Q, b_0} = L_0` certificate.
    #[arg(long, default_value_t = 2)]
    homotopy_max_weight: i64,
}

pub fn gerstenhaber(a: &GerstenhaberArgs) -> Result<Report, CliError> {
    usage(a.dimv == 0, "dimv must be at least 1")?;
    usage(a.flavor_cap == 0, "flavor-cap must be at least 1")?;
    let spec = FreeSystemSpec::string(a.dimv);
    let brst = spec.brst(&rat(1, 2))?.with_flavor_cap(Some(a.flavor_cap));
    let window = BasisWindow::up_to(a.homotopy_max_weight, -5..=6, a.charge_range.clone());
    let reps = orbit_representatives(&spec, &window)?;
    let homotopy = brst.homotopy_report(&reps)?;
    let cocycles = brst.cocycles(0..=0, a.ghost_range.clone(), a.charge_range.clone())?;
    let r = brst.gerstenhaber_check(&cocycles)?;
    let passed = r.passed() && homotopy.failures == 0;
    let rows = vec![row(
        "gerstenhaber",
        &[
            ("cocycles", r.cocycles.to_string()),
            ("triples", r.triples_checked.to_string()),
            ("commutativity_failures", r.commutativity_failures.to_string()),
            ("antisymmetry_failures", r.antisymmetry_failures.to_string()),
            ("associativity_failures", r.associativity_failures.to_string()),
            ("leibniz_failures", r.leibniz_failures.to_string()),
            ("jacobi_failures", r.jacobi_failures.to_string()),
            ("non_closed_products", r.non_closed_products.to_string()),
            ("homotopy_states", homotopy.states_checked.to_string()),
            ("homotopy_failures", homotopy.failures.to_string()),
        ],
    )];
    let summary = format!("{} cocycles, {} triples", r.cocycles, r.triples_checked);
    let json = json!({
        "dimv": a.dimv,
        "flavor_cap": a.flavor_cap,
        "report": r,
        "homotopy": homotopy,
    });
    Ok(Report { json, rows, passed, summary })
}

#[derive(Args, Debug)]
pub struct GfArgs {
    /// Truncations `M` of the Lie algebra `span{L_-1..L_M}`.
    #[arg(long, value_delimiter = ',', default_value = "3,5")]
    cutoff: Vec<i64>,
    #[arg(long, default_value_t = 1)]
    dimv: usize,
    #[arg(long, default_value_t = 3)]
    poly_cap: usize,
}

pub fn gf(a: &GfArgs) -> Result<Report, CliError> {
    usage(a.cutoff.is_empty(), "at least one cutoff is required")?;
    let mut rows = Vec::new();
    let mut reduced = Vec::new();
    let mut passed = true;
    for &m in &a.cutoff {
        let r = gelfandfuks::reduced_w1_cohomology(m)?;
        let ok = r.dims == [0, 0, 1] && r.top_coefficient != "0/1";
        passed &= ok;
        rows.push(row(
            "reduced_w1",
            &[
                ("cutoff", m.to_string()),
                ("h1", r.dims[0].to_string()),
                ("h2", r.dims[1].to_string()),
                ("h3", r.dims[2].to_string()),
                ("top_coefficient", r.top_coefficient.clone()),
            ],
        ));
        reduced.push(r);
    }
    let g = TruncatedW1::new(a.cutoff[0])?;
    let cartan = gelfandfuks::cartan_homotopy_check(&gelfandfuks::build_ce_complex(&g, &CEModuleSpec::Trivial, 3)?);
    passed &= cartan.passed();
    rows.push(row(
        "cartan",
        &[("cutoff", a.cutoff[0].to_string()), ("checked", cartan.checked.to_string()), ("passed", cartan.passed().to_string())],
    ));
    let def = gelfandfuks::weight0_def_complex_dims(a.dimv, a.poly_cap)?;
    passed &= def.matches_oracle();
    for c in &def.cells {
        rows.push(row(
            "deformation",
            &[
                ("degree", c.degree.to_string()),
                ("sym_degree", c.sym_degree.to_string()),
                ("dimension", c.dimension.to_string()),
                ("expected", c.expected.to_string()),
            ],
        ));
    }
    let json = json!({
        "reduced_w1": reduced,
        "cartan": cartan,
        "deformation_complex": def,
        "deformation_matches_oracle": def.matches_oracle(),
    });
    Ok(Report { json, rows, passed, summary: format!("cutoffs {:?}", a.cutoff) })
}

pub fn anomaly(dimv: u64, n_range: RangeInclusive<i64>) -> Result<Report, CliError> {
    usage(dimv == 0, "dimv must be at least 1")?;
    usage(*n_range.start() < 0, "n-range must be non-negative (tensor weight n ≥ 0)")?;
    let mut rows = Vec::new();
    let table_expect = [rat(1, 12), rat(3, 8), rat(1, 8), rat(1, 2)];
    let table_fns = [
        anomaly::ParamRational::with_sum_power(int(1), 2, 1, 4),
        anomaly::ParamRational::with_sum_power(int(1), 1, 1, 3),
        anomaly::ParamRational::with_sum_power(int(1), 2, 0, 3),
        anomaly::ParamRational::with_sum_power(int(1), 1, 0, 2),
    ];
    let mut passed = true;
    let mut t_table = Vec::new();
    for (f, want) in table_fns.iter().zip(&table_expect) {
        let t = anomaly::t_integral(f);
        let lim = t.limit()?;
        passed &= &lim == want && t.is_l_independent();
        rows.push(row("t_integral", &[("integrand", f.to_string()), ("limit", q(&lim))]));
        t_table.push(json!({"integrand": f, "limit": q(&lim), "l_independent": t.is_l_independent()}));
    }
    let mut wheels = vec![anomaly::wheel_report(WheelSpec::full(Edge::Bc))?];
    for n in n_range {
        wheels.push(anomaly::wheel_report(WheelSpec::full(Edge::BetaGamma { weight: n as u32 }))?);
    }
    let g = anomaly::wheel_coefficient(WheelSpec::full(Edge::BetaGamma { weight: 0 }))?;
    for w in &wheels {
        let ratio = &w.coefficient / &g;
        let expected = match w.spec.edge {
            Edge::Bc => int(-13),
            Edge::BetaGamma { weight } => {
                let n = weight as i64;
                int(6 * n * n + 6 * n + 1)
            }
        };
        passed &= ratio == expected && w.l_independent;
        rows.push(row(
            "wheel",
            &[
                ("edge", serde_json::to_string(&w.spec.edge)?),
                ("coefficient", q(&w.coefficient)),
                ("ratio_to_g", q(&ratio)),
                ("units", w.units.to_string()),
            ],
        ));
    }
    let ob = anomaly::obstruction(dimv)?;
    passed &= ob.in_g_units == int(dimv as i64 - 13);
    passed &= anomaly::tadpole_weight() == int(0);
    rows.push(row("obstruction", &[("dimv", dimv.to_string()), ("in_g_units", q(&ob.in_g_units))]));
    let json = json!({
        "t_integrals": t_table,
        "wheels": wheels,
        "obstruction": ob,
        "tadpole_weight": q(&anomaly::tadpole_weight()),
    });
    let summary = format!("obstruction at dimV={dimv}: {} G", q(&ob.in_g_units));
    Ok(Report { json, rows, passed, summary })
}

pub fn grr(dimv: u64, genus: &[u64], n_range: RangeInclusive<i64>) -> Result<Report, CliError> {
    let mut rows = Vec::new();
    let mut passed = true;
    let mut sheaves = vec![("string".to_string(), SheafSpec::string(dimv), grr::expected_string_c1(dimv))];
    for n in n_range {
        sheaves.push((format!("T^{n}[1]"), SheafSpec::tangent_power(n, 1), grr::expected_tensor_c1(n)));
    }
    let mut c1 = Vec::new();
    for (name, s, want) in &sheaves {
        let r = grr::grr_report(s)?;
        passed &= &r.tangent_squared == want;
        rows.push(row("c1", &[("sheaf", name.clone()), ("c1_tangent_squared", q(&r.tangent_squared))]));
        c1.push(json!({"sheaf": name, "report": r}));
    }
    let mut lines = Vec::new();
    for &g in genus {
        let l = grr::global_observables_line(g, dimv)?;
        if dimv == 13 {
            passed &= l.k_exponent == if g == 1 { -14 } else { -13 };
        }
        rows.push(row(
            "global_observables",
            &[("genus", g.to_string()), ("k_exponent", l.k_exponent.to_string()), ("shift", l.shift.to_string())],
        ));
        lines.push(l);
    }
    let json = json!({"dimv": dimv, "c1": c1, "global_observables": lines});
    Ok(Report { json, rows, passed, summary: format!("dimV={dimv}") })
}

pub fn consistency(n_range: RangeInclusive<i64>) -> Result<Report, CliError> {
    usage(*n_range.start() < 0, "n-range must be non-negative (tensor weight n ≥ 0)")?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut check = |name: String, values: Vec<(&str, Rational)>| {
        let ok = values.windows(2).all(|w| w[0].1 == w[1].1);
        rows.push(row(
            "identity",
            &[
                ("identity", name.clone()),
                ("values", values.iter().map(|(k, v)| format!("{k}={}", q(v))).collect::<Vec<_>>().join(";")),
                ("passed", ok.to_string()),
            ],
        ));
        checks.push(json!({
            "identity": name,
            "values": values.iter().map(|(k, v)| (k.to_string(), Value::from(q(v)))).collect::<serde_json::Map<_, _>>(),
            "passed": ok,
        }));
        ok
    };
    let g = anomaly::wheel_coefficient(WheelSpec::full(Edge::BetaGamma { weight: 0 }))?;
    let f = anomaly::wheel_coefficient(WheelSpec::full(Edge::Bc))?;
    let grr_ghost = grr::grr_pushforward_c1(&SheafSpec::tangent_power(1, 1))?.tangent_squared();
    let grr_matter = grr::grr_pushforward_c1(&SheafSpec::trivial(1))?.tangent_squared();
    let mut passed = check(
        "ghost/matter ratio".into(),
        vec![
            ("wheel", &f / &g),
            ("central_charge", FreeSystemSpec::bc().central_charge() / FreeSystemSpec::beta_gamma(1).central_charge()),
            ("grr", &grr_ghost / &grr_matter),
            ("expected", int(-13)),
        ],
    );
    passed &= check(
        "critical dimension".into(),
        vec![
            ("central_charge_d13", FreeSystemSpec::string(13).central_charge()),
            ("obstruction_d13", anomaly::obstruction_coefficient(13)?),
            ("grr_d13", grr::grr_pushforward_c1(&SheafSpec::string(13))?.tangent_squared()),
            ("expected", int(0)),
        ],
    );
    for n in n_range {
        let wheel = anomaly::wheel_coefficient(WheelSpec::full(Edge::BetaGamma { weight: n as u32 }))? / &g;
        let grr_c1 = grr::grr_pushforward_c1(&SheafSpec::tangent_power(n, 1))?.tangent_squared();
        let cc = FreeSystemSpec::weighted_pair(n, Statistics::Bosonic).central_charge();
        passed &= check(
            format!("tensor weight n={n}"),
            vec![
                ("wheel_ratio", wheel),
                ("minus_12_grr", grr_c1 * int(-12)),
                ("half_central_charge", cc / int(2)),
                ("expected", int(6 * n * n + 6 * n + 1)),
            ],
        );
    }
    let total = checks.len();
    let json = json!({"identities": checks, "passed": passed});
    Ok(Report { json, rows, passed, summary: format!("{total} identities") })
}
