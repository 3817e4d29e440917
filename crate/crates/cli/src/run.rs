use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use serde_json::{json, Value};
use xnt_core::boxcount::{
    bound_ratio_scan, complete_sum_g, crt_factor_check, poisson_compare, run_box_experiment,
    BoxOptions, BoxProblem, PrimePolicy,
};
use xnt_core::field::{additive_char_table, ExtField, FiniteField, PrimeField};
use xnt_core::sieve::{
    browning_weight, detector, membership_filter, power_decomposition_check, sieve_bound_eval,
    SieveConfig,
};
use xnt_core::trace::{kloosterman, named_trace};
use xnt_core::variety::{
    classify_u, diagonal_dual_oracle, fiber_counts, fiber_records, pair_counts, pair_records,
    singular_fiber_scan, FiberCountRecord, UClass,
};
use xnt_core::weight::SmoothWeight;
use xnt_core::{parse_multi, parse_uni, MultiPoly, UniPoly};

use crate::args::*;
use crate::report::{Report, Table};
use crate::CliError;

/// Everything a subcommand produces.
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
    /// One-line human summary.
    pub summary: String,
    /// Set when a checked assertion failed; the report is still written.
    pub failure: Option<String>,
}

struct Ctx {
    budget: u128,
    seed: u64,
    semi: Vec<String>,
    timings: BTreeMap<String, f64>,
}

impl Ctx {
    fn time<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        self.timings
            .insert(name.into(), start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

struct Done {
    result: Value,
    tables: Vec<Table>,
    summary: String,
    failure: Option<String>,
}

impl Done {
    fn ok(result: Value, tables: Vec<Table>, summary: String) -> Self {
        Done {
            result,
            tables,
            summary,
            failure: None,
        }
    }
}

fn multi(flag: &str, text: &str) -> Result<MultiPoly, CliError> {
    let p = parse_multi(text).map_err(|e| CliError::Input(format!("--{flag}: {e}")))?;
    let again =
        parse_multi(&p.to_string()).map_err(|e| CliError::Invariant(format!("--{flag}: {e}")))?;
    if again.to_string() != p.to_string() {
        return Err(CliError::Invariant(format!(
            "--{flag}: '{p}' does not round-trip"
        )));
    }
    Ok(p)
}

fn multi_pair(fa: &str, ta: &str, fb: &str, tb: &str) -> Result<(MultiPoly, MultiPoly), CliError> {
    Ok(MultiPoly::common_frame(&multi(fa, ta)?, &multi(fb, tb)?)?)
}

fn uni(flag: &str, text: &str) -> Result<UniPoly, CliError> {
    let p = parse_uni(text).map_err(|e| CliError::Input(format!("--{flag}: {e}")))?;
    let again =
        parse_uni(&p.to_string()).map_err(|e| CliError::Invariant(format!("--{flag}: {e}")))?;
    if again != p {
        return Err(CliError::Invariant(format!(
            "--{flag}: '{p}' does not round-trip"
        )));
    }
    Ok(p)
}

fn same_arity(u: &[i64], form: &MultiPoly) -> Result<(), CliError> {
    if u.len() != form.n_vars() {
        return Err(CliError::Input(format!(
            "--u has {} entries but {form} has {} variables",
            u.len(),
            form.n_vars()
        )));
    }
    Ok(())
}

fn cjson(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn class_json(c: &UClass) -> Value {
    match c {
        UClass::ZeroType => json!({"kind": "zero-type"}),
        UClass::Good { searched_up_to } => {
            json!({"kind": "good", "searched_up_to": searched_up_to})
        }
        UClass::Bad(pt) => json!({"kind": "bad", "witness": pt.to_string(), "witness_point": pt}),
    }
}

fn class_name(c: &UClass) -> &'static str {
    match c {
        UClass::ZeroType => "zero-type",
        UClass::Good { .. } => "good",
        UClass::Bad(_) => "bad",
    }
}

/// Classifies `u`, through the diagonal oracle when `form` is diagonal and
/// the tangency scan otherwise. Returns the class and the oracle's verdict.
fn classify(
    form: &MultiPoly,
    u: &[i64],
    p: u64,
    kmax: u32,
    ctx: &mut Ctx,
) -> Result<(UClass, Option<UClass>), CliError> {
    let scan = classify_u(form, u, p, kmax, ctx.budget)?;
    if let UClass::Good {
        searched_up_to: Some(k),
    } = scan
    {
        ctx.semi.push(format!(
            "u = {u:?} classified good by tangency scan up to k_max = {k} at p = {p}"
        ));
    }
    let oracle = match form.as_diagonal() {
        Some((coeffs, d)) => diagonal_dual_oracle(&coeffs, d, u, p).ok(),
        None => None,
    };
    if let Some(o) = &oracle {
        if o.kind() != scan.kind() {
            return Err(CliError::Invariant(format!(
                "tangency scan says {} but the diagonal oracle says {} for u = {u:?}, p = {p}",
                class_name(&scan),
                class_name(o)
            )));
        }
    }
    Ok((scan, oracle))
}

fn trace_table(t: &xnt_core::TraceFunction) -> Table {
    let mut table = Table::new("trace", ["a", "re", "im"]);
    for (a, v) in t.values().iter().enumerate() {
        table.push([a.to_string(), v.re.to_string(), v.im.to_string()]);
    }
    table
}

fn klsum(a: &KlsumArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let field = PrimeField::new(a.p)?;
    let form = multi("F", &a.form)?;
    let n = form.n_vars();
    let u = a.u.clone().unwrap_or_else(|| vec![0; n]);
    same_arity(&u, &form)?;
    let kl = kloosterman(a.m, &field)?;
    let twisted = u.iter().any(|&c| c.rem_euclid(a.p as i64) != 0);
    let pf = a.p as f64;
    let scale = pf.powf(n as f64 / 2.0);
    let sum = ctx.time("sum", |ctx| -> Result<Complex64, CliError> {
        if twisted {
            Ok(complete_sum_g(&form, &kl, &u, a.p, ctx.budget)?)
        } else {
            let counts = fiber_counts(&form, &field, ctx.budget)?;
            Ok(counts
                .iter()
                .zip(kl.values())
                .map(|(&c, &v)| v * c as f64)
                .sum())
        }
    })?;
    let mut result = json!({
        "m": a.m,
        "p": a.p,
        "F": form.to_string(),
        "n_vars": n,
        "u": u,
        "sum": cjson(sum),
        "abs": sum.norm(),
        "ratio": sum.norm() / scale,
        "normalization": format!("p^{}", n as f64 / 2.0),
    });
    if !twisted {
        let main: Complex64 = kl.values().iter().sum::<Complex64>() * pf.powi(n as i32 - 1);
        result["main_term"] = cjson(main);
        result["centered_ratio"] = json!((sum - main).norm() / scale);
    } else if form.is_homogeneous() {
        let (class, oracle) = classify(&form, &u, a.p, a.kmax, ctx)?;
        result["class"] = class_json(&class);
        result["oracle"] = oracle.as_ref().map(class_json).unwrap_or(Value::Null);
    }
    let summary = format!(
        "|sum Kl_{}(F(x))| / p^{{n/2}} = {:.6} at p = {}",
        a.m,
        sum.norm() / scale,
        a.p
    );
    Ok(Done::ok(result, vec![trace_table(&kl)], summary))
}

fn tracesum(a: &TracesumArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let field = PrimeField::new(a.p)?;
    let (f, g) = match a.g.as_deref() {
        Some(t) => {
            let (f, g) = multi_pair("f", &a.f, "g", t)?;
            (f, Some(g))
        }
        None => (multi("f", &a.f)?, None),
    };
    let t = named_trace(&a.trace, &field)?;
    let n = f.n_vars();
    let pf = a.p as f64;
    let counts: Vec<u64> = ctx.time("counts", |ctx| -> Result<Vec<u64>, CliError> {
        Ok(match &g {
            Some(g) => pair_counts(&f, g, &field, ctx.budget)?
                .iter()
                .map(|row| row[0])
                .collect(),
            None => fiber_counts(&f, &field, ctx.budget)?,
        })
    })?;
    let (main_exp, scale_exp) = if g.is_some() {
        (n as i32 - 2, (n as f64 - 1.0) / 2.0)
    } else {
        (n as i32 - 1, n as f64 / 2.0)
    };
    let sum: Complex64 = counts
        .iter()
        .zip(t.values())
        .map(|(&c, &v)| v * c as f64)
        .sum();
    let main = t.values().iter().sum::<Complex64>() * pf.powi(main_exp);
    let scale = pf.powf(scale_exp);
    let mut result = json!({
        "trace": t.label(),
        "p": a.p,
        "f": f.to_string(),
        "g": g.as_ref().map(|g| g.to_string()),
        "n_vars": n,
        "points": counts.iter().sum::<u64>(),
        "sum": cjson(sum),
        "main_term": cjson(main),
        "error": (sum - main).norm(),
        "ratio": (sum - main).norm() / scale,
        "normalization": format!("p^{scale_exp}"),
    });
    if a.singular_fibers {
        let fibers = ctx.time("singular_fibers", |ctx| {
            singular_fiber_scan(&f, g.as_ref(), a.p, a.kmax, ctx.budget)
        })?;
        ctx.semi.push(format!(
            "singular fibers searched over F_{}^k, k <= {}",
            a.p, a.kmax
        ));
        result["singular_fibers"] = json!(fibers);
    }
    let mut table = Table::new("fibers", ["a", "count", "t_re", "t_im"]);
    for (i, (&c, v)) in counts.iter().zip(t.values()).enumerate() {
        table.push([
            i.to_string(),
            c.to_string(),
            v.re.to_string(),
            v.im.to_string(),
        ]);
    }
    let summary = format!(
        "|sum - main| / {} = {:.6}",
        format_args!("p^{scale_exp}"),
        (sum - main).norm() / scale
    );
    Ok(Done::ok(result, vec![table], summary))
}

fn mixsum(a: &MixsumArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let field = PrimeField::new(a.p)?;
    let (form, g) = multi_pair("F", &a.form, "G", &a.g)?;
    let t = named_trace(&a.trace, &field)?;
    let psi = additive_char_table(&field);
    let table = ctx.time("counts", |ctx| pair_counts(&form, &g, &field, ctx.budget))?;
    let sum: Complex64 = table
        .iter()
        .zip(t.values())
        .map(|(row, &ta)| {
            row.iter()
                .zip(&psi)
                .map(|(&c, &pb)| pb * c as f64)
                .sum::<Complex64>()
                * ta
        })
        .sum();
    let n = form.n_vars();
    let scale = (a.p as f64).powf(n as f64 / 2.0);
    let result = json!({
        "trace": t.label(),
        "p": a.p,
        "F": form.to_string(),
        "G": g.to_string(),
        "n_vars": n,
        "sum": cjson(sum),
        "abs": sum.norm(),
        "ratio": sum.norm() / scale,
    });
    let mut marg = Table::new("marginals", ["a", "count"]);
    for (i, row) in table.iter().enumerate() {
        marg.push([i as u64, row.iter().sum::<u64>()]);
    }
    let summary = format!("|sum t(F) psi(G)| / p^{{n/2}} = {:.6}", sum.norm() / scale);
    Ok(Done::ok(result, vec![marg], summary))
}

fn sieve_check(a: &SieveCheckArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let err = ctx.time("check", |_| power_decomposition_check(a.d, a.p))?;
    let pass = err <= a.tol;
    let result = json!({"d": a.d, "p": a.p, "max_error": err, "tol": a.tol, "pass": pass});
    let mut table = Table::new("check", ["d", "p", "max_error", "pass"]);
    table.push([
        a.d.to_string(),
        a.p.to_string(),
        err.to_string(),
        pass.to_string(),
    ]);
    let failure = (!pass).then(|| format!("max error {err:.3e} exceeds {:.1e}", a.tol));
    Ok(Done {
        result,
        tables: vec![table],
        summary: format!("max error {err:.3e}"),
        failure,
    })
}

fn parse_range(s: &str) -> Result<(i128, i128), CliError> {
    let bad = || CliError::Input(format!("--range '{s}' must look like LO:HI"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let (lo, hi): (i128, i128) = (
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    );
    if lo > hi {
        return Err(CliError::Input(format!("--range '{s}' is empty")));
    }
    if hi - lo > 10_000_000 {
        return Err(CliError::Input(format!(
            "--range '{s}' is longer than 10^7"
        )));
    }
    Ok((lo, hi))
}

fn sieve_detect(a: &SieveDetectArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let h = uni("f", &a.h)?;
    let primes = match a.primes.parse::<PrimePolicy>()? {
        PrimePolicy::List(l) => l,
        PrimePolicy::Auto => {
            return Err(CliError::Input(
                "sieve-detect needs an explicit --primes list:...; automatic selection needs a box problem (see boxcount)"
                    .into(),
            ))
        }
    };
    let config = SieveConfig::new(h.clone(), primes, a.threshold)?;
    let data = ctx.time("prime_data", |_| config.prime_data())?;
    if let Some(dp) = data.iter().find(|d| !d.image_bound_holds()) {
        return Err(CliError::Invariant(format!(
            "image bound fails at p = {}",
            dp.p
        )));
    }
    let mut ptable = Table::new(
        "primes",
        [
            "p",
            "image_size",
            "image_bound",
            "exceptional",
            "bound_tight",
        ],
    );
    for d in &data {
        let s = d.summary();
        let exc: Vec<String> = s.exceptional.iter().map(|e| e.to_string()).collect();
        ptable.push([
            s.p.to_string(),
            s.image_size.to_string(),
            d.image_bound().to_string(),
            exc.join(";"),
            s.bound_tight.to_string(),
        ]);
    }
    let mut header = vec!["n".to_string(), "passes_filter".to_string()];
    header.extend(data.iter().map(|d| format!("D_{}", d.p)));
    if a.alpha.is_some() {
        header.extend(data.iter().map(|d| format!("w_{}", d.p)));
    }
    let mut vtable = Table::new("values", header);
    let mut values = Vec::new();
    for &n in &a.values {
        let dets: Vec<f64> = data.iter().map(|d| detector(d, n)).collect();
        let weights: Option<Vec<f64>> = a
            .alpha
            .map(|al| data.iter().map(|d| browning_weight(d, n, al)).collect());
        let pass = membership_filter(&data, n);
        let mut row = vec![n.to_string(), pass.to_string()];
        row.extend(dets.iter().map(|v| v.to_string()));
        if let Some(w) = &weights {
            row.extend(w.iter().map(|v| v.to_string()));
        }
        vtable.push(row);
        values.push(json!({"n": n, "passes_filter": pass, "detectors": dets, "weights": weights}));
    }
    let mut result = json!({
        "h": h.to_string(),
        "threshold_rule": a.threshold,
        "threshold": config.threshold(),
        "primes": data.iter().map(|d| d.summary()).collect::<Vec<_>>(),
        "values": values,
    });
    let mut summary = format!("{} primes, all in P_h", data.len());
    if let Some(r) = &a.range {
        let (lo, hi) = parse_range(r)?;
        let seq: BTreeMap<i128, f64> = (lo..=hi).map(|n| (n, 1.0)).collect();
        let ledger = ctx.time("ledger", |_| sieve_bound_eval(&config, &data, &seq))?;
        summary = format!(
            "P^2 V_h = {:.3} vs (2d)^2 Sigma = {:.3} (hypothesis {})",
            ledger.lhs, ledger.rhs, ledger.hypothesis_ok
        );
        result["ledger"] = json!(ledger);
    }
    Ok(Done::ok(result, vec![ptable, vtable], summary))
}

fn classify_cmd(a: &ClassifyUArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let form = multi("F", &a.form)?;
    same_arity(&a.u, &form)?;
    PrimeField::new(a.p)?;
    let (class, oracle) = ctx.time("classify", |ctx| classify(&form, &a.u, a.p, a.kmax, ctx))?;
    let witness = match &class {
        UClass::Bad(pt) => pt.to_string(),
        _ => String::new(),
    };
    let mut table = Table::new("classification", ["u", "class", "witness"]);
    let u_text: Vec<String> = a.u.iter().map(|c| c.to_string()).collect();
    table.push([
        u_text.join(";"),
        class_name(&class).to_string(),
        witness.clone(),
    ]);
    let result = json!({
        "F": form.to_string(),
        "p": a.p,
        "u": a.u,
        "class": class_json(&class),
        "oracle": oracle.as_ref().map(class_json),
    });
    let summary = format!(
        "u is {}{}",
        class_name(&class),
        if witness.is_empty() {
            String::new()
        } else {
            format!(", tangent at {witness}")
        }
    );
    Ok(Done::ok(result, vec![table], summary))
}

fn fiber_rows<K: FiniteField>(
    a: &FibersArgs,
    form: &MultiPoly,
    field: &K,
    ctx: &mut Ctx,
) -> Result<Vec<FiberCountRecord>, CliError> {
    match &a.g {
        None => Ok(fiber_records(form, field, ctx.budget)?),
        Some(g) => {
            let (form, g) = multi_pair("F", &a.form, "G", g)?;
            let form = &form;
            let ai = a.a.expect("clap requires --a with --G");
            if ai >= field.order() {
                return Err(CliError::Input(format!(
                    "--a {ai} is not an element index below {}",
                    field.order()
                )));
            }
            let recs = pair_records(form, &g, field.element(ai), field, ctx.budget)?;
            let single = fiber_counts(form, field, ctx.budget)?[ai as usize];
            let total: u64 = recs.iter().map(|r| r.count).sum();
            if total != single {
                return Err(CliError::Invariant(format!(
                    "sum_b N(a, b) = {total} but N(a) = {single}"
                )));
            }
            Ok(recs)
        }
    }
}

fn fibers(a: &FibersArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let form = multi("F", &a.form)?;
    let (q, recs) = if a.k == 1 {
        let field = PrimeField::new(a.p)?;
        (
            field.order(),
            ctx.time("count", |ctx| fiber_rows(a, &form, &field, ctx))?,
        )
    } else {
        let field = ExtField::new(a.p, a.k)?;
        (
            field.order(),
            ctx.time("count", |ctx| fiber_rows(a, &form, &field, ctx))?,
        )
    };
    let max_dev = recs
        .iter()
        .map(|r| r.normalized_deviation.abs())
        .fold(0.0, f64::max);
    let mut table = Table::new(
        "fibers",
        ["a", "b", "count", "deviation", "normalized_deviation"],
    );
    for r in &recs {
        table.push([
            r.a.to_string(),
            r.b.map(|b| b.to_string()).unwrap_or_default(),
            r.count.to_string(),
            r.deviation.to_string(),
            r.normalized_deviation.to_string(),
        ]);
    }
    let result = json!({
        "F": form.to_string(),
        "G": a.g,
        "p": a.p,
        "k": a.k,
        "q": q,
        "n_vars": form.n_vars(),
        "total": recs.iter().map(|r| r.count).sum::<u64>(),
        "max_abs_normalized_deviation": max_dev,
        "records": recs,
    });
    Ok(Done::ok(
        result,
        vec![table],
        format!(
            "{} fibers, max |normalized deviation| = {max_dev:.4}",
            recs.len()
        ),
    ))
}

fn boxcount(a: &BoxcountArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let problem = BoxProblem::new(uni("f", &a.f)?, multi("F", &a.form)?, a.b)?;
    let opts = BoxOptions {
        primes: a.primes.parse()?,
        k_max: a.kmax,
        threshold: a.threshold,
        budget: ctx.budget,
        seed: ctx.seed,
        spot_checks: a.spot_checks,
        tallies: !a.no_tallies,
    };
    let rep = run_box_experiment(&problem, &opts)?;
    for (k, v) in &rep.timings_ms {
        ctx.timings.insert(k.clone(), *v);
    }
    ctx.semi.extend(rep.semi_decisions.iter().cloned());

    let mut primes = Table::new("primes", ["p", "image_size", "exceptional", "bound_tight"]);
    for s in &rep.primes {
        let exc: Vec<String> = s.exceptional.iter().map(|e| e.to_string()).collect();
        primes.push([
            s.p.to_string(),
            s.image_size.to_string(),
            exc.join(";"),
            s.bound_tight.to_string(),
        ]);
    }
    let mut excluded = Table::new("excluded", ["p", "reason"]);
    for e in rep.window.iter().flat_map(|w| &w.excluded) {
        excluded.push([e.p.to_string(), e.reason.clone()]);
    }
    let mut exceptional = Table::new("exceptional", ["k"]);
    for k in &rep.exceptional.members {
        exceptional.push([k]);
    }
    let mut discs = Table::new("discriminants", ["k", "disc", "omega", "critical"]);
    for d in &rep.discriminants {
        discs.push([
            d.k.to_string(),
            d.disc.to_string(),
            d.omega.to_string(),
            d.critical.to_string(),
        ]);
    }
    let mut tables = vec![primes, excluded, exceptional, discs];
    if let Some(t) = &rep.tallies {
        let mut tally = Table::new("tallies", ["class", "count", "max_ratio"]);
        let fmt = |m: Option<f64>| m.map(|v| v.to_string()).unwrap_or_default();
        tally.push([
            "zero-type".to_string(),
            t.zero_type.to_string(),
            fmt(t.max_zero),
        ]);
        tally.push(["good".to_string(), t.good.to_string(), fmt(t.max_good)]);
        tally.push(["bad".to_string(), t.bad.to_string(), fmt(t.max_bad)]);
        tables.push(tally);
    }
    let summary = format!(
        "N = {} (sieve rejected {} of {} points), primes {:?}",
        rep.exact_count,
        rep.sieve.rejected_by_sieve,
        rep.sieve.total_points,
        rep.primes.iter().map(|p| p.p).collect::<Vec<_>>()
    );
    let mut result = serde_json::to_value(&rep).map_err(|e| CliError::Invariant(e.to_string()))?;
    if let Some(obj) = result.as_object_mut() {
        obj.remove("timings_ms");
        obj.remove("semi_decisions");
        obj.remove("tool_version");
    }
    Ok(Done::ok(result, tables, summary))
}

fn bound_scan(a: &BoundScanArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let f = uni("f", &a.f)?;
    let form = multi("F", &a.form)?;
    let scan = ctx.time("scan", |ctx| {
        bound_ratio_scan(&f, &form, &a.grid, ctx.budget)
    })?;
    let mut table = Table::new("bound", ["B", "count", "theorem_ratio", "serre_ratio"]);
    for r in &scan.rows {
        table.push([
            r.b.to_string(),
            r.count.to_string(),
            r.theorem_ratio.to_string(),
            r.serre_ratio.to_string(),
        ]);
    }
    let summary = format!("spread {:.3}, bounded {}", scan.spread, scan.bounded);
    Ok(Done::ok(json!(scan), vec![table], summary))
}

fn poisson_check(a: &PoissonCheckArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let form = multi("F", &a.form)?;
    let tp = named_trace(&a.tp, &PrimeField::new(a.p)?)?;
    let tq = named_trace(&a.tq, &PrimeField::new(a.q)?)?;
    let w = SmoothWeight::with_kappa(a.b, a.kappa)?;
    let rec = ctx.time("poisson", |ctx| {
        poisson_compare(&form, &w, a.p, a.q, &tp, &tq, a.u_cutoff, ctx.budget)
    })?;
    let mut table = Table::new(
        "poisson",
        [
            "direct_re",
            "direct_im",
            "poisson_re",
            "poisson_im",
            "error",
            "tail_bound",
            "u_cutoff",
        ],
    );
    table.push([
        rec.direct.re.to_string(),
        rec.direct.im.to_string(),
        rec.poisson.re.to_string(),
        rec.poisson.im.to_string(),
        rec.error.to_string(),
        rec.tail_bound.to_string(),
        rec.u_cutoff.to_string(),
    ]);
    let summary = format!(
        "|direct - poisson| = {:.3e} <= tail bound {:.3e} (U = {})",
        rec.error, rec.tail_bound, rec.u_cutoff
    );
    Ok(Done::ok(json!(rec), vec![table], summary))
}

fn crt_check(a: &CrtCheckArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let form = multi("F", &a.form)?;
    same_arity(&a.u, &form)?;
    let tp = named_trace(&a.tp, &PrimeField::new(a.p)?)?;
    let tq = named_trace(&a.tq, &PrimeField::new(a.q)?)?;
    let rec = ctx.time("crt", |ctx| {
        crt_factor_check(&form, &a.u, a.p, a.q, &tp, &tq, ctx.budget)
    })?;
    let pass = rec.rel_error <= a.tol;
    let mut table = Table::new(
        "crt",
        [
            "lhs_re",
            "lhs_im",
            "rhs_re",
            "rhs_im",
            "abs_error",
            "rel_error",
        ],
    );
    table.push([
        rec.lhs.re,
        rec.lhs.im,
        rec.rhs.re,
        rec.rhs.im,
        rec.abs_error,
        rec.rel_error,
    ]);
    let mut result = json!(rec);
    result["tol"] = json!(a.tol);
    result["pass"] = json!(pass);
    let failure =
        (!pass).then(|| format!("relative error {:.3e} exceeds {:.1e}", rec.rel_error, a.tol));
    Ok(Done {
        result,
        tables: vec![table],
        summary: format!("relative error {:.3e}", rec.rel_error),
        failure,
    })
}

fn config_map(cmd: &Command, budget: u128) -> BTreeMap<String, Value> {
    let v = match cmd {
        Command::Klsum(a) => json!(a),
        Command::Tracesum(a) => json!(a),
        Command::Mixsum(a) => json!(a),
        Command::SieveCheck(a) => json!(a),
        Command::SieveDetect(a) => json!(a),
        Command::ClassifyU(a) => json!(a),
        Command::Fibers(a) => json!(a),
        Command::Boxcount(a) => json!(a),
        Command::BoundScan(a) => json!(a),
        Command::PoissonCheck(a) => json!(a),
        Command::CrtCheck(a) => json!(a),
    };
    let mut map: BTreeMap<String, Value> = match v {
        Value::Object(m) => m.into_iter().collect(),
        _ => BTreeMap::new(),
    };
    map.insert("budget".into(), json!(budget));
    map
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let mut ctx = Ctx {
        budget: cli.common.budget,
        seed: cli.common.seed,
        semi: Vec::new(),
        timings: BTreeMap::new(),
    };
    let start = Instant::now();
    let done = match &cli.command {
        Command::Klsum(a) => klsum(a, &mut ctx),
        Command::Tracesum(a) => tracesum(a, &mut ctx),
        Command::Mixsum(a) => mixsum(a, &mut ctx),
        Command::SieveCheck(a) => sieve_check(a, &mut ctx),
        Command::SieveDetect(a) => sieve_detect(a, &mut ctx),
        Command::ClassifyU(a) => classify_cmd(a, &mut ctx),
        Command::Fibers(a) => fibers(a, &mut ctx),
        Command::Boxcount(a) => boxcount(a, &mut ctx),
        Command::BoundScan(a) => bound_scan(a, &mut ctx),
        Command::PoissonCheck(a) => poisson_check(a, &mut ctx),
        Command::CrtCheck(a) => crt_check(a, &mut ctx),
    }?;
    ctx.timings
        .insert("total".into(), start.elapsed().as_secs_f64() * 1e3);
    let mut report = Report::new(
        cli.command.name(),
        ctx.seed,
        config_map(&cli.command, ctx.budget),
    );
    report.result = done.result;
    report.semi_decisions = ctx.semi;
    report.timings_ms = ctx.timings;
    Ok(Outcome {
        report,
        tables: done.tables,
        summary: done.summary,
        failure: done.failure,
    })
}
