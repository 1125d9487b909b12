//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{run, stderr, write_ff, write_project};
use expressdyn::basis::{build_basis_matrix, BasisId, BasisMatrix, FusionSpec};
use expressdyn::beat::whole;
use expressdyn::eval::{loo_cross_validation, pearson_r, r_squared, FoldOutcome, LooPiece};
use expressdyn::loudness::{momentary_loudness, normalize_curve, AudioBuffer};
use expressdyn::models::{
    fit_to_performance, objective, objective_gradient, solve_ridge, train, train_params, Model, ModelKind, Params,
    PieceRef, TrainConfig,
};
use expressdyn::score::parse_score;
use expressdyn::sensitivity::{linear_intercept, sd_graph, sensitivity_graph, SensitivityGraph};
use expressdyn::synth::{ff_scenario, interaction_corpus, linear_corpus, regression_piece, FfScenario};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn gradient_suite() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_param, mut worst_input) = (0.0f64, 0.0f64);
    let eps = 1e-6;
    for case in 0..100 {
        let kind = ModelKind::ALL[case % 3];
        let (n, k, h) = (rng.random_range(1..=6), rng.random_range(1..=8), rng.random_range(1..=4));
        let init = Params::init(kind, k, h, &vec![true; k], &mut rng).unwrap();
        let flat: Vec<f64> = (0..init.to_flat().len()).map(|_| rng.random_range(-0.8..0.8)).collect();
        let params = init.with_flat(&flat);
        let x = Array2::from_shape_fn((n, k), |_| rng.random_range(-1.5..1.5));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
        let piece = (x.clone(), y);
        let l2 = 0.01;

        let analytic = objective_gradient(&params, &piece, l2);
        let numeric: Vec<f64> = (0..flat.len())
            .map(|i| {
                let (mut up, mut down) = (flat.clone(), flat.clone());
                up[i] += eps;
                down[i] -= eps;
                (objective(&params.with_flat(&up), &piece, l2) - objective(&params.with_flat(&down), &piece, l2))
                    / (2.0 * eps)
            })
            .collect();
        worst_param = worst_param.max(rel_err(&analytic, &numeric));

        let analytic = params.input_gradients(x.view());
        let mut numeric = Array2::zeros((n, k));
        for t in 0..n {
            for j in 0..k {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[[t, j]] += eps;
                down[[t, j]] -= eps;
                numeric[[t, j]] = (params.predict(up.view())[t] - params.predict(down.view())[t]) / (2.0 * eps);
            }
        }
        worst_input = worst_input.max(rel_err(analytic.as_slice().unwrap(), numeric.as_slice().unwrap()));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_param < 1e-4 && worst_input < 1e-4 && secs < 60.0,
        format!("100 instances; max relative error {worst_param:.2e} (parameters), {worst_input:.2e} (inputs); {secs:.1} s"),
    )
}

fn lin_oracle() -> Verdict {
    let (matrix, target) = regression_piece(200, 10, 7);
    let piece = (matrix.data().clone(), Array1::from(target.values.clone()));
    let config = TrainConfig { max_epochs: 3000, patience: 3000, l2: 1e-3, ..TrainConfig::default() };
    let exact = solve_ridge(std::slice::from_ref(&piece), config.l2, &[true; 10]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (params, _) = train_params(ModelKind::Lin, &[piece], &[], &config, &mut rng).unwrap();
    let Params::Lin(gd) = params else { unreachable!() };
    let rmse = ((&gd.w - &exact.w).mapv(|v| v * v).sum() / 10.0).sqrt();
    verdict(rmse < 1e-3, format!("weight RMSE {rmse:.2e} against the ridge solution (200 steps, 10 basis functions)"))
}

fn mean_r2(outcomes: &[FoldOutcome]) -> Option<f64> {
    let scores: Option<Vec<f64>> = outcomes.iter().map(|o| o.report().map(|r| r.r_squared)).collect();
    scores.map(|s| s.iter().sum::<f64>() / s.len() as f64)
}

fn model_ordering() -> Verdict {
    let start = Instant::now();
    let mut holds = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let corpus = interaction_corpus(6, 128, 0.05, seed);
        let config = TrainConfig { seed, ..TrainConfig::default() };
        let means: Vec<Option<f64>> = ModelKind::ALL
            .iter()
            .map(|&kind| mean_r2(&loo_cross_validation(&corpus, kind, &config, 1).unwrap()))
            .collect();
        let ok = match means[..] {
            [Some(lin), Some(ffnn), Some(birnn)] => birnn >= ffnn && ffnn >= lin && ffnn - lin >= 0.1,
            _ => false,
        };
        holds += usize::from(ok);
        let show = |m: Option<f64>| m.map_or("failed".to_string(), |v| format!("{v:.3}"));
        lines.push(format!("seed {seed}: lin {} ffnn {} birnn {}", show(means[0]), show(means[1]), show(means[2])));
    }
    verdict(
        holds >= 4,
        format!("ordering holds on {holds}/5 seeds ({}); {:.1} s", lines.join("; "), start.elapsed().as_secs_f64()),
    )
}

fn metric_identities() -> Verdict {
    let target = [0.0, 1.0, 2.0];
    let mean = [1.0, 1.0, 1.0];
    let checks = [
        ("R2(target, target) = 1", r_squared(&target, &target).unwrap() == 1.0),
        ("R2(mean, target) = 0", r_squared(&mean, &target).unwrap() == 0.0),
        ("R2([2,1,0], [0,1,2]) = -3", r_squared(&[2.0, 1.0, 0.0], &target).unwrap() == -3.0),
        ("r(-target, target) = -1", pearson_r(&[-0.0, -1.0, -2.0], &target).unwrap() == -1.0),
        ("worse than the mean is negative", r_squared(&[1.5, 1.0, 0.5], &target).unwrap() < 0.0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    if failed.is_empty() {
        verdict(true, format!("{} identities exact", checks.len()))
    } else {
        verdict(false, format!("violated: {}", failed.join(", ")))
    }
}

fn sine(freq: f64, amp: f64, rate: u32, samples: usize) -> Vec<f64> {
    (0..samples).map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin()).collect()
}

fn loudness_checks() -> Verdict {
    let rate = 44_100;
    let n = 1024 * 43;
    let blocks = |audio: &AudioBuffer| momentary_loudness(audio, 1024, 1024).unwrap().values;
    let full = blocks(&AudioBuffer::mono(rate, sine(1000.0, 1.0, rate, n)).unwrap());
    let (lo, hi) = full.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let sine_ok = full.iter().all(|v| (v + 3.70).abs() <= 0.1);

    let x = sine(1000.0, 0.5, rate, n);
    let mono = blocks(&AudioBuffer::mono(rate, x.clone()).unwrap());
    let stereo = blocks(&AudioBuffer::new(rate, vec![x.clone(), x.clone()]).unwrap());
    let quiet = blocks(&AudioBuffer::mono(rate, x.iter().map(|v| v * 0.1).collect()).unwrap());
    let worst = |a: &[f64], b: &[f64], want: f64| a.iter().zip(b).map(|(p, q)| (p - q - want).abs()).fold(0.0, f64::max);
    let stereo_dev = worst(&stereo, &mono, 3.01);
    let gain_dev = worst(&mono, &quiet, 20.0);

    let varying: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(rate);
            (0.2 + 0.7 * (PI * t).sin().abs()) * (2.0 * PI * 330.0 * t).sin()
        })
        .collect();
    let curve = momentary_loudness(&AudioBuffer::mono(rate, varying).unwrap(), 1024, 1024).unwrap();
    let z = normalize_curve(&curve).unwrap().values;
    let m = z.iter().sum::<f64>() / z.len() as f64;
    let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
    let norm_ok = m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9;

    let mark = |ok: bool| if ok { "ok" } else { "FAILED" };
    verdict(
        sine_ok && stereo_dev <= 0.02 && gain_dev <= 0.01 && norm_ok,
        format!(
            "full-scale 1 kHz sine {lo:.3}..{hi:.3} LUFS, want -3.70 +/- 0.1 [{}]; stereo +3.01 within {stereo_dev:.4} [{}]; \
             gain 0.1 -20.0 within {gain_dev:.2e} [{}]; z-curve mean {m:.1e}, std-1 {:.1e} [{}]",
            mark(sine_ok),
            mark(stereo_dev <= 0.02),
            mark(gain_dev <= 0.01),
            sd - 1.0,
            mark(norm_ok)
        ),
    )
}

const TWO_OBOES: &str = r#"<?xml version="1.0"?>
<score-partwise version="3.1">
  <work><work-title>Two oboes</work-title></work>
  <part-list>
    <score-part id="P1"><part-name>Oboe 1</part-name></score-part>
    <score-part id="P2"><part-name>Oboe 2</part-name></score-part>
  </part-list>
  <part id="P1">
    <measure number="1">
      <attributes><divisions>1</divisions><time><beats>4</beats><beat-type>4</beat-type></time></attributes>
      <direction><direction-type><dynamics><f/></dynamics></direction-type></direction>
      <note><pitch><step>C</step><octave>5</octave></pitch><duration>2</duration><voice>1</voice></note>
      <note><pitch><step>D</step><octave>5</octave></pitch><duration>2</duration><voice>1</voice></note>
    </measure>
  </part>
  <part id="P2">
    <measure number="1">
      <attributes><divisions>1</divisions><time><beats>4</beats><beat-type>4</beat-type></time></attributes>
      <direction><direction-type><dynamics><p/></dynamics></direction-type></direction>
      <note><pitch><step>A</step><octave>4</octave></pitch><duration>1</duration><voice>1</voice></note>
      <note><pitch><step>B</step><octave>4</octave></pitch><duration>1</duration><voice>1</voice></note>
      <note><pitch><step>C</step><octave>5</octave></pitch><duration>2</duration><voice>1</voice></note>
    </measure>
  </part>
</score-partwise>
"#;

fn merge_fuse_oracle() -> Verdict {
    let m = build_basis_matrix(&parse_score(TWO_OBOES).unwrap(), &FusionSpec::default()).unwrap();
    let expected: [(&str, [f64; 3]); 5] = [
        ("pitch", [(72.0 / 127.0 + 69.0 / 127.0) / 2.0, 71.0 / 127.0, (74.0 / 127.0 + 72.0 / 127.0) / 2.0]),
        ("duration", [1.5, 1.0, 2.0]),
        ("polyphony", [2.0, 1.0, 2.0]),
        ("dyn.f", [1.0, 0.0, 1.0]),
        ("dyn.p", [1.0, 1.0, 1.0]),
    ];
    let mut wrong = Vec::new();
    if m.times() != [whole(0), whole(1), whole(2)] {
        wrong.push("onset grid".to_string());
    }
    if m.columns().iter().any(|c| c.class != "oboe") {
        wrong.push("instrument classes not merged".to_string());
    }
    for (feature, want) in expected {
        let got = m.column(&BasisId::new("oboe", feature)).map(|c| c.to_vec());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if got.as_deref().map(bits) != Some(bits(&want)) {
            wrong.push(format!("oboe.{feature} = {got:?}"));
        }
    }
    if wrong.is_empty() {
        verdict(true, format!("{} steps x {} columns; pitch, duration, polyphony, dyn.f, dyn.p bit-exact", m.rows(), m.columns().len()))
    } else {
        verdict(false, wrong.join("; "))
    }
}

fn phi(matrix: &BasisMatrix, id: &BasisId) -> Vec<f64> {
    matrix.column(id).map_or_else(|| vec![0.0; matrix.rows()], |c| c.to_vec())
}

fn annihilated(graph: &SensitivityGraph, matrix: &BasisMatrix) -> bool {
    graph.columns.iter().enumerate().all(|(k, id)| {
        phi(matrix, id).iter().enumerate().all(|(t, &v)| v != 0.0 || graph.data[[t, k]].to_bits() == 0)
    })
}

fn pretrain(kind: ModelKind, corpus: &[LooPiece], config: &TrainConfig) -> Model {
    let refs: Vec<PieceRef> = corpus.iter().map(|p| PieceRef::new(&p.matrix, &p.target)).collect();
    train(kind, &refs, &[], config).unwrap().0
}

fn ff_sign(kind: ModelKind, s: &FfScenario) -> (bool, f64) {
    let base = pretrain(kind, &s.corpus, &TrainConfig { hidden: 8, ..TrainConfig::default() });
    let fit = TrainConfig { max_epochs: 200, patience: 10, ..TrainConfig::default() };
    let louder = fit_to_performance(&base, PieceRef::new(&s.matrix, &s.louder), &fit).unwrap().0;
    let softer = fit_to_performance(&base, PieceRef::new(&s.matrix, &s.softer), &fit).unwrap().0;
    let sd = sd_graph(&louder, &softer, &s.matrix, "louder", "softer").unwrap().graph;
    let k = sd.column_index(&FfScenario::ff_column()).unwrap();
    let min = (0..sd.times.len())
        .filter(|&t| sd.times[t] >= s.ff_span.0 && sd.times[t] < s.ff_span.1)
        .map(|t| sd.data[[t, k]])
        .fold(f64::INFINITY, f64::min);
    (min > 0.0, min)
}

fn sensitivity_suite() -> Verdict {
    let start = Instant::now();
    let s = ff_scenario(0).unwrap();
    let quick = TrainConfig { hidden: 4, max_epochs: 40, ..TrainConfig::default() };
    let models: Vec<Model> = ModelKind::ALL.iter().map(|&k| pretrain(k, &s.corpus, &quick)).collect();

    let mut cells = 0usize;
    let annihilation = models.iter().all(|m| {
        s.corpus.iter().map(|p| &p.matrix).chain([&s.matrix]).all(|x| {
            let g = sensitivity_graph(m, x).unwrap();
            cells += g.data.len();
            annihilated(&g, x)
        })
    });

    let fit = TrainConfig { max_epochs: 50, ..quick.clone() };
    let antisymmetry = models.iter().all(|m| {
        let a = fit_to_performance(m, PieceRef::new(&s.matrix, &s.louder), &fit).unwrap().0;
        let b = fit_to_performance(m, PieceRef::new(&s.matrix, &s.softer), &fit).unwrap().0;
        let ab = sd_graph(&a, &b, &s.matrix, "a", "b").unwrap().graph;
        let ba = sd_graph(&b, &a, &s.matrix, "b", "a").unwrap().graph;
        ab.data.iter().zip(ba.data.iter()).all(|(x, y)| x.to_bits() == (-y + 0.0).to_bits())
    });

    let lin = &models[0];
    let intercept = linear_intercept(lin).unwrap();
    let mut decomposition = 0.0f64;
    for x in s.corpus.iter().map(|p| &p.matrix).chain([&s.matrix]) {
        let g = sensitivity_graph(lin, x).unwrap();
        let pred = lin.predict(x).unwrap();
        for t in 0..pred.len() {
            decomposition = decomposition.max((g.data.row(t).sum() + intercept - pred[t]).abs());
        }
    }

    let signs: Vec<(ModelKind, bool, f64)> = ModelKind::ALL
        .iter()
        .map(|&k| {
            let (ok, min) = ff_sign(k, &s);
            (k, ok, min)
        })
        .collect();
    let ff_ok = signs.iter().all(|s| s.1);
    let ff_text: Vec<String> = signs.iter().map(|(k, _, min)| format!("{k} {min:.3}")).collect();

    let mark = |ok: bool| if ok { "ok" } else { "FAILED" };
    verdict(
        annihilation && antisymmetry && decomposition <= 1e-12 && ff_ok,
        format!(
            "annihilation over {cells} cells [{}]; SD antisymmetry bit-exact [{}]; Lin row sum within {decomposition:.1e} [{}]; \
             min ff SD over beats 24-40: {} [{}]; {:.1} s",
            mark(annihilation),
            mark(antisymmetry),
            mark(decomposition <= 1e-12),
            ff_text.join(", "),
            mark(ff_ok),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn end_to_end_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let train = TrainConfig { hidden: 4, max_epochs: 80, ..TrainConfig::default() };
    let corpus_dir = d.join("corpus");
    fs::create_dir_all(&corpus_dir).unwrap();
    let kinds = ModelKind::ALL;
    let project = write_project(&corpus_dir, &interaction_corpus(5, 64, 0.05, 11), &kinds, train, 1);
    let ff = write_ff(d, &ff_scenario(4).unwrap(), ModelKind::Birnn);
    let (project, ff_project) = (project.to_str().unwrap(), ff.project.to_str().unwrap());
    let (louder, softer) = (ff.louder.to_str().unwrap(), ff.softer.to_str().unwrap());

    let mut outputs: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for (i, jobs) in ["1", "8", "1", "8"].iter().enumerate() {
        let tag = |name: &str| format!("{i}-{name}");
        let steps: Vec<Vec<String>> = vec![
            vec!["loo".into(), project.into(), "-o".into(), tag("loo.csv")],
            vec!["train".into(), ff_project.into(), "-o".into(), tag("base.json")],
            vec!["fit".into(), tag("base.json"), louder.into(), "-o".into(), tag("a.json")],
            vec!["fit".into(), tag("base.json"), softer.into(), "-o".into(), tag("b.json")],
            vec!["compare".into(), tag("a.json"), tag("b.json"), "passage.txt".into(), "-o".into(), tag("sd")],
        ];
        for step in steps {
            let mut args: Vec<&str> = step.iter().map(String::as_str).collect();
            args.extend(["--seed", "5", "--jobs", jobs, "--config", ff_project]);
            let out = run(d, &args);
            if !out.status.success() {
                return verdict(false, format!("`{}` exited {:?}: {}", args.join(" "), out.status.code(), stderr(&out)));
            }
        }
        outputs.push((fs::read(d.join(tag("loo.csv"))).unwrap(), fs::read(d.join(tag("sd.csv"))).unwrap()));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        same,
        format!(
            "4 runs (--jobs 1, 8, 1, 8) of loo ({} bytes) and compare ({} bytes) {}",
            outputs[0].0.len(),
            outputs[0].1.len(),
            if same { "byte-identical" } else { "differ" }
        ),
    )
}

fn noise_free_loo() -> Verdict {
    let start = Instant::now();
    let corpus = linear_corpus(3, 64, 0);
    let outcomes = loo_cross_validation(&corpus, ModelKind::Lin, &TrainConfig::default(), 1).unwrap();
    let reports: Vec<_> = outcomes.iter().filter_map(FoldOutcome::report).collect();
    let secs = start.elapsed().as_secs_f64();
    let ok = reports.len() == 3 && reports.iter().all(|r| r.r_squared >= 0.99 && r.pearson_r >= 0.995) && secs < 300.0;
    let folds: Vec<String> =
        reports.iter().map(|r| format!("{} R2 {:.4} r {:.4}", r.piece_id, r.r_squared, r.pearson_r)).collect();
    verdict(ok, format!("{} of 3 folds done ({}); {secs:.2} s", reports.len(), folds.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("gradient suite", gradient_suite),
        ("Lin oracle", lin_oracle),
        ("model ordering", model_ordering),
        ("metric identities", metric_identities),
        ("loudness", loudness_checks),
        ("merge/fuse oracle", merge_fuse_oracle),
        ("sensitivity suite", sensitivity_suite),
        ("end-to-end determinism", end_to_end_determinism),
        ("noise-free leave-one-out", noise_free_loo),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!("{} {}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
