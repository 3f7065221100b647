//! End-to-end checks of the statistical claims and the engine.
//!
//! Runs as a plain binary so every check prints one PASS/FAIL line. Exits
//! non-zero if any check fails.

use std::time::Instant;

use rayon::prelude::*;
use sphx_core::analysis::{self, mu};
use sphx_core::embedding::{self, make_transform, SparseCode, TransformKind, UnitVector};
use sphx_core::engine::SearchEngine;
use sphx_core::evaluate::{pr_auc, pr_curve};
use sphx_core::index::{load_index, save_index, Cutoff, IndexConfig};
use sphx_core::rng;
use sphx_core::simulate::{self, ExperimentReport, ExperimentSpec, Mode, Sampler};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

/// Accumulates sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    count: usize,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.count += 1;
        if !ok {
            let msg = what();
            eprintln!("    failed: {msg}");
            self.failures.push(msg);
        }
    }

    fn report(&mut self, report: &ExperimentReport, name: &str) {
        for c in &report.cells {
            self.check(c.pass != Some(false), || format!("{name}: {c:?}"));
        }
    }

    fn finish(self, summary: String) -> Outcome {
        let pass = self.failures.is_empty();
        let detail = if pass {
            format!("{} checks; {summary}", self.count)
        } else {
            format!("{}/{} checks failed; {summary}", self.failures.len(), self.count)
        };
        Outcome::new(pass, detail)
    }
}

/// 1. Joint tail probability against direct sampling and closed forms.
fn mu_oracle() -> Outcome {
    const N: usize = 10_000_000;
    const CHUNKS: u64 = 100;
    let lambdas = [-0.9, -0.5, 0.0, 0.3, 0.6, 0.9];
    let hs = [0.0, 1.0, 2.0, 3.33];
    let mut checks = Checks::default();
    let mut worst: f64 = 0.0;
    for (li, &lambda) in lambdas.iter().enumerate() {
        let s = (1.0f64 - lambda * lambda).sqrt();
        let hits: Vec<[u64; 4]> = (0..CHUNKS)
            .into_par_iter()
            .map(|c| {
                let mut g = rng::seeded(rng::derive_seed(1000 + li as u64, c));
                let mut hit = [0u64; 4];
                for _ in 0..N / CHUNKS as usize {
                    let u = rng::standard_normal(&mut g);
                    let v = lambda * u + s * rng::standard_normal(&mut g);
                    let low = u.min(v);
                    for (k, &h) in hs.iter().enumerate() {
                        hit[k] += (low >= h) as u64;
                    }
                }
                hit
            })
            .collect();
        for (k, &h) in hs.iter().enumerate() {
            let count: u64 = hits.iter().map(|c| c[k]).sum();
            let p = count as f64 / N as f64;
            // With no hits the binomial standard error collapses; use 1/N.
            let se = (p.max(1.0 / N as f64) * (1.0 - p) / N as f64).sqrt();
            let exact = mu(lambda, h).unwrap().mu;
            let z = (exact - p).abs() / se;
            worst = worst.max(z);
            checks.check(z <= 4.0, || format!("lambda {lambda}, h {h}: quad {exact:e}, mc {p:e}, z {z:.2}"));
        }
    }
    let tails = [(0.0, 0.5), (1.0, 0.15865525393145705), (2.0, 0.022750131948179207), (3.33, 4.3422992038165538e-4)];
    for (h, q) in tails {
        let at0 = mu(0.0, h).unwrap().mu;
        let at1 = mu(1.0, h).unwrap().mu;
        checks.check((at0 - q * q).abs() <= 1e-10, || format!("mu(0, {h}) = {at0} vs {}", q * q));
        checks.check((at1 - q).abs() <= 1e-10, || format!("mu(1, {h}) = {at1} vs {q}"));
    }
    checks.finish(format!("worst |z| = {worst:.2} over 24 cells at 1e7 samples"))
}

/// 2. Mean code size against `m (1 - Phi(h))`.
fn sparsity_law() -> Outcome {
    let mut checks = Checks::default();
    let gauss = simulate::run(&ExperimentSpec {
        m: (10..=16).map(|e| 1usize << e).collect(),
        r: vec![0.25, 0.5, 0.75],
        trials: 200,
        seed: 23,
        ..ExperimentSpec::new(Mode::Sparsity, TransformKind::Gaussian)
    })
    .unwrap();
    checks.report(&gauss, "gaussian");
    let structured = simulate::run(&ExperimentSpec {
        m: (12..=16).map(|e| 1usize << e).collect(),
        r: vec![0.25, 0.5, 0.75],
        trials: 4000,
        seed: 22,
        ..ExperimentSpec::new(Mode::Sparsity, TransformKind::Structured)
    })
    .unwrap();
    checks.report(&structured, "structured");
    for e in 10..=16 {
        let m = 1usize << e;
        let at = |r: f64| gauss.cells.iter().find(|c| c.m == m && c.r == Some(r)).unwrap();
        checks.check(at(0.75).theory < at(0.5).theory, || format!("r = 0.75 not below r = 0.5 at m = {m}"));
        checks.check(at(0.75).statistic < at(0.5).statistic, || {
            format!("empirical r = 0.75 not below r = 0.5 at m = {m}")
        });
    }
    let spot = analysis::expected_sparsity(1 << 16, 0.5).unwrap().exact;
    checks.check((spot - 28.43537436500264).abs() < 1e-9, || format!("E k at 2^16, 0.5 = {spot}"));
    let worst_rel = structured
        .cells
        .iter()
        .map(|c| (c.statistic / c.theory - 1.0).abs())
        .fold(0.0, f64::max);
    checks.finish(format!(
        "E k(2^16, 0.5) = {spot:.4}; structured worst relative gap {:.2}%",
        100.0 * worst_rel
    ))
}

/// 3. The structured map preserves squared length times m.
fn structured_norm() -> Outcome {
    let mut checks = Checks::default();
    let mut worst: f64 = 0.0;
    let mut g = rng::seeded(3);
    for m in [1usize << 8, 1 << 14] {
        for kind in [TransformKind::Structured, TransformKind::BiasedStructured] {
            for i in 0..100u64 {
                let d = [3usize, 100, 256][i as usize % 3];
                let t = make_transform(kind, d, m, 500 + i).unwrap();
                let x = UnitVector::new(rng::random_unit(&mut g, d)).unwrap();
                let n2 = t.apply(&x).unwrap().norm_sq();
                let rel = (n2 - m as f64).abs() / m as f64;
                worst = worst.max(rel);
                checks.check(rel <= 1e-9, || format!("{kind:?} m {m} d {d}: |FDx|^2 = {n2}"));
            }
        }
    }
    checks.finish(format!("worst relative deviation {worst:.2e}"))
}

/// 4. Type I and type II rates at the error-band edges.
fn error_rates() -> Outcome {
    let mut checks = Checks::default();
    let mut summary = Vec::new();
    let rates = |kind: TransformKind, seed: u64| {
        let mut out = Vec::new();
        for mode in [Mode::TypeI, Mode::TypeII] {
            let spec = ExperimentSpec {
                m: vec![1 << 16],
                r: vec![0.45],
                lambda: 0.9,
                eta: 1.645,
                trials: 20_000,
                seed,
                ..ExperimentSpec::new(mode, kind)
            };
            let rep = simulate::run(&spec).unwrap();
            out.push(rep.cells[0].clone());
        }
        out
    };
    for (kind, seed) in [(TransformKind::Gaussian, 41), (TransformKind::Structured, 42)] {
        let cells = rates(kind, seed);
        for c in &cells {
            checks.check(c.pass == Some(true), || format!("{kind:?}: {c:?}"));
        }
        summary.push(format!(
            "{kind:?} I {:.4} II {:.4} (tol {:.3})",
            cells[0].statistic, cells[1].statistic, cells[0].tolerance
        ));
    }
    let biased = rates(TransformKind::BiasedStructured, 43);
    let gap = (biased[0].statistic - biased[1].statistic).abs();
    let se = (biased[0].std_error.powi(2) + biased[1].std_error.powi(2)).sqrt();
    checks.check(gap > 5.0 * se, || format!("biased gap {gap} vs 5 se {}", 5.0 * se));
    summary.push(format!(
        "Biased I {:.4} II {:.4} ({:.0} se apart)",
        biased[0].statistic,
        biased[1].statistic,
        gap / se
    ));
    checks.finish(summary.join("; "))
}

/// 5. Normalized score CDF against Phi.
fn score_cdf() -> Outcome {
    let mut checks = Checks::default();
    let rep = simulate::run(&ExperimentSpec {
        m: vec![1 << 16],
        r: vec![0.45],
        lambda: 0.9,
        trials: 20_000,
        seed: 51,
        ..ExperimentSpec::new(Mode::ScoreCdf, TransformKind::Gaussian)
    })
    .unwrap();
    checks.report(&rep, "cdf");
    let c = &rep.cells[0];
    checks.check(c.pass.is_some(), || "cdf cell not judged".into());
    checks.finish(format!("sup gap {:.4} <= {:.4}", c.statistic, c.tolerance))
}

/// 6. Below the phase boundary the score is almost always zero.
fn phase_transition() -> Outcome {
    let mut checks = Checks::default();
    let base = ExperimentSpec {
        lambda: -0.2,
        r: vec![0.5],
        m: vec![1 << 14, 1 << 16, 1 << 18],
        trials: 1_000_000,
        seed: 61,
        sampler: Sampler::ActiveRows,
        ..ExperimentSpec::new(Mode::PhaseTransition, TransformKind::Gaussian)
    };
    let rep = simulate::run(&base).unwrap();
    checks.report(&rep, "active rows");
    // The full transform path at smaller trial counts, bound only.
    for (m, trials) in [(1usize << 14, 20_000), (1 << 16, 10_000)] {
        let full = simulate::run(&ExperimentSpec {
            m: vec![m],
            trials,
            seed: 62,
            sampler: Sampler::Transform,
            ..base.clone()
        })
        .unwrap();
        checks.report(&full, "transform");
    }
    let rates: Vec<String> = rep
        .cells
        .iter()
        .filter(|c| c.label == "p_nonzero")
        .map(|c| format!("{:.2e}<={:.2e}", c.statistic, c.theory))
        .collect();
    checks.finish(format!("P(S>0) vs m mu: {}", rates.join(", ")))
}

fn brute_force(
    codes: &[(String, SparseCode)],
    query: &SparseCode,
    cutoff: Cutoff,
    m_mu: Option<f64>,
) -> Vec<(String, u32)> {
    let mut all: Vec<(String, u32)> = codes
        .iter()
        .map(|(id, c)| (id.clone(), embedding::overlap(query, c).unwrap() as u32))
        .collect();
    all.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    match cutoff {
        Cutoff::TopK { k } => {
            all.retain(|(_, c)| *c >= 1);
            all.truncate(k);
        }
        _ => {
            let t = m_mu.unwrap();
            all.retain(|(_, c)| *c as f64 >= t);
        }
    }
    all
}

/// 7. Engine output equals pairwise scoring; persistence is lossless.
fn index_oracle() -> Outcome {
    let mut checks = Checks::default();
    let d = 32;
    let n = 1000;
    let mut g = rng::seeded(71);
    let corpus: Vec<(String, UnitVector)> = (0..n)
        .map(|i| (format!("doc{:04}", (i * 7919) % n), UnitVector::new(rng::random_unit(&mut g, d)).unwrap()))
        .collect();
    let queries: Vec<UnitVector> = (0..50)
        .map(|i| {
            let base = corpus[i * 13].1.coords();
            let noise = rng::random_unit(&mut g, d);
            let w = if i % 5 == 0 { 2.0 } else { 0.3 };
            UnitVector::normalized(base.iter().zip(&noise).map(|(a, b)| a + w * b).collect()).unwrap()
        })
        .collect();
    let mut compared = 0usize;
    for (kind, q) in [(TransformKind::Structured, 1.0), (TransformKind::Gaussian, 1.3)] {
        let m = 1 << 14;
        let config = IndexConfig::new(m, 0.3, q, kind, d, 72).unwrap();
        let engine = SearchEngine::build(&corpus, config).unwrap();

        // Independent encoding through a separately constructed transform.
        let t = make_transform(kind, d, m, 72).unwrap();
        let codes: Vec<(String, SparseCode)> = corpus
            .iter()
            .map(|(id, x)| (id.clone(), embedding::map_vector(&t, x, config.h_index).unwrap()))
            .collect();
        let cutoffs = [
            Cutoff::ThresholdLambda { lambda: 0.5 },
            Cutoff::ThresholdLambda { lambda: 0.8 },
            Cutoff::ThresholdLambda { lambda: -1.0 },
            Cutoff::TopK { k: 1 },
            Cutoff::TopK { k: 10 },
        ];
        for x in &queries {
            let qc = embedding::map_vector(&t, x, config.h_query).unwrap();
            for cutoff in cutoffs {
                let got = engine.search_vector(x, cutoff).unwrap();
                let m_mu = match cutoff {
                    Cutoff::ThresholdLambda { lambda } => Some(m as f64 * mu(lambda, config.h_index).unwrap().mu),
                    _ => None,
                };
                let want = brute_force(&codes, &qc, cutoff, m_mu);
                let got_pairs: Vec<(String, u32)> =
                    got.results.iter().map(|r| (r.doc_id.clone(), r.raw_count)).collect();
                checks.check(got_pairs == want, || format!("{kind:?} {cutoff:?}: results differ"));
                checks.check(
                    got.results.iter().all(|r| r.score == r.raw_count as f64 / m as f64),
                    || "score != raw_count / m".into(),
                );
                compared += want.len();
            }
        }

        let mut bytes = Vec::new();
        save_index(engine.index(), &mut bytes).unwrap();
        let loaded = load_index(bytes.as_slice()).unwrap();
        checks.check(&loaded == engine.index(), || format!("{kind:?}: reload differs"));
        let reloaded = SearchEngine::from_index(loaded).unwrap();
        for x in queries.iter().take(10) {
            let a = engine.search_vector(x, Cutoff::TopK { k: 10 }).unwrap();
            let b = reloaded.search_vector(x, Cutoff::TopK { k: 10 }).unwrap();
            checks.check(a == b, || format!("{kind:?}: reloaded search differs"));
        }
    }
    checks.finish(format!("{compared} result rows matched across 2 engines x 50 queries x 5 cutoffs"))
}

/// 8. Error-band roots: accurate, shrinking in m, close to the closed form.
fn epsilon_consistency() -> Outcome {
    let mut checks = Checks::default();
    let (lambda, r, eta) = (0.9, 0.45, 1.645);
    let mut prev: Option<(f64, f64)> = None;
    let mut last = (0.0, 0.0, 0.0);
    for e in 14..=20 {
        let m = 1usize << e;
        let sol = analysis::solve_epsilons(lambda, m, r, eta).unwrap();
        let (em, ep) = sol.both().unwrap();
        let (rm, rp) = (sol.residual_minus.unwrap(), sol.residual_plus.unwrap());
        checks.check(rm.abs() <= 1e-8 && rp.abs() <= 1e-8, || format!("m 2^{e}: residuals {rm:e} {rp:e}"));
        if let Some((pm, pp)) = prev {
            checks.check(em < pm && ep < pp, || format!("m 2^{e}: eps did not shrink"));
        }
        prev = Some((em, ep));
        last = (em, ep, analysis::epsilon_asymptotic(lambda, m, r, eta).unwrap());
    }
    let (em, ep, ea) = last;
    for (name, v) in [("eps-", em), ("eps+", ep)] {
        let ratio = v / ea;
        checks.check((0.5..=2.0).contains(&ratio), || format!("{name}/asym = {ratio}"));
    }
    let reference = [(14, 0.0979570, 0.0787337), (16, 0.064544131, 0.056807708), (20, 0.0284486, 0.0270778)];
    for (e, rm, rp) in reference {
        let (em, ep) = analysis::solve_epsilons(lambda, 1 << e, r, eta).unwrap().both().unwrap();
        checks.check((em - rm).abs() < 1e-6 && (ep - rp).abs() < 1e-6, || {
            format!("m 2^{e}: ({em}, {ep}) vs ({rm}, {rp})")
        });
    }
    checks.finish(format!(
        "at 2^20 eps- {em:.5} eps+ {ep:.5} closed form {ea:.5} (ratios {:.2}, {:.2})",
        em / ea,
        ep / ea
    ))
}

/// 9. Area under the mean precision-recall curve on a clustered corpus.
fn retrieval_quality() -> Outcome {
    let mut checks = Checks::default();
    let (d, n, clusters, per_cluster) = (128, 5000, 20, 25);
    let mut g = rng::seeded(91);
    let queries: Vec<UnitVector> = (0..clusters)
        .map(|_| UnitVector::new(rng::random_unit(&mut g, d)).unwrap())
        .collect();
    let mut corpus = Vec::with_capacity(n);
    for (qi, q) in queries.iter().enumerate() {
        for j in 0..per_cluster {
            let lambda = 0.85 + 0.1 * rand::Rng::random::<f64>(&mut g);
            let w = rng::random_unit(&mut g, d);
            let dot: f64 = w.iter().zip(q.coords()).map(|(a, b)| a * b).sum();
            let perp: Vec<f64> = w.iter().zip(q.coords()).map(|(a, b)| a - dot * b).collect();
            let norm = perp.iter().map(|a| a * a).sum::<f64>().sqrt();
            let s = (1.0 - lambda * lambda).sqrt();
            let v: Vec<f64> = q.coords().iter().zip(&perp).map(|(a, b)| lambda * a + s * b / norm).collect();
            corpus.push((format!("c{qi:02}-{j:02}"), UnitVector::normalized(v).unwrap()));
        }
    }
    while corpus.len() < n {
        let i = corpus.len();
        corpus.push((format!("bg{i:05}"), UnitVector::new(rng::random_unit(&mut g, d)).unwrap()));
    }
    let config = IndexConfig::new(1 << 16, 0.45, 1.0, TransformKind::Structured, d, 92).unwrap();
    let engine = SearchEngine::build(&corpus, config).unwrap();
    let thresholds: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let points = pr_curve(&engine, &corpus, &queries, &thresholds).unwrap();
    let auc = pr_auc(&points);
    checks.check(auc >= 0.95, || format!("AUC {auc}"));
    let best = points
        .iter()
        .max_by(|a, b| (a.precision + a.recall).total_cmp(&(b.precision + b.recall)))
        .unwrap();
    checks.finish(format!(
        "AUC {auc:.4}; best point T = {:.2}: p {:.3} r {:.3}",
        best.threshold, best.precision, best.recall
    ))
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    // Optional filter: a criterion number or part of its name.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [Check; 9] = [
        ("mu oracle agreement", mu_oracle),
        ("sparsity law", sparsity_law),
        ("structured norm identity", structured_norm),
        ("type I/II error band", error_rates),
        ("normal approximation of the score CDF", score_cdf),
        ("phase transition", phase_transition),
        ("index equals brute force", index_oracle),
        ("error band consistency", epsilon_consistency),
        ("retrieval quality", retrieval_quality),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) && f != &(i + 1).to_string() {
                continue;
            }
        }
        let start = Instant::now();
        let out = run();
        let status = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {}: {status} {name} ({:.1}s) {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            out.detail
        );
        failed += !out.pass as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
