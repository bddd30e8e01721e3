//! Acceptance criteria 1 to 12, one PASS/FAIL line each.
//!
//! Set `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.
//! `ACCEPTANCE_ONLY=3,7` runs a subset.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use siamtrack::ablation::{generate, pinned_suite, run_suite};
use siamtrack::attention::{
    multi_head_attention_with_weights, mpa_block, pa_block, AttentionParams, ModulationParams, MODEL_DIM,
};
use siamtrack::bbox::{giou, BBox};
use siamtrack::bench::{analytic, measure};
use siamtrack::eval::{evaluate, read_results};
use siamtrack::fusion::{build_template_kv, fuse_with_weights, CombineMode, FusionParams, TemplateFeatures};
use siamtrack::head::{grad_check_coordinates, HeadObjective, HeadParams, LossWeights};
use siamtrack::image::Image;
use siamtrack::tensor::{conv1x1, linear, mac_count, reset_mac_count, FeatureMap, Tensor};
use siamtrack::temporal::{smooth_box, TemplateBank, TrackerConfig, TrackerState};
use siamtrack::tracker::{RunConfig, TrackerModel, SEARCH_SIZE, TEMPLATE_SIZE};
use siamtrack::train::finetune;
use siamtrack::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(r: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| r.gen_range(-1.0..1.0))
}

fn random_map(r: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
    FeatureMap::new(random_tensor(r, &[c, h, w]), 16).unwrap()
}

fn noise_image(r: &mut ChaCha8Rng, side: usize) -> Image {
    Image::new(Tensor::from_fn(&[3, side, side], |_| r.gen())).unwrap()
}

fn mpa_residual_identity() -> Outcome {
    let started = Instant::now();
    let mut r = rng(1);
    let d = MODEL_DIM;
    let p = AttentionParams::random(&mut r, d, d, 6).unwrap();
    let m = ModulationParams::random(&mut r, d, 0.0);
    let mut mismatches = 0;
    for _ in 0..100 {
        let (h, w) = (r.gen_range(2..9), r.gen_range(2..9));
        let x = random_map(&mut r, d, h, w);
        let (kh, kw) = (r.gen_range(2..9), r.gen_range(2..9));
        let kv = random_map(&mut r, d, kh, kw);
        let out = mpa_block(&x, &kv, &kv, r.gen_range(1..3), &p, &m).unwrap();
        let same = out.dims() == x.dims()
            && out.data().iter().zip(x.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        mismatches += usize::from(!same);
    }
    let elapsed = started.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(1),
        format!("{mismatches}/100 outputs differ from input bits, {elapsed:.2?}"),
    )
}

fn row_sum_error(weights: &[Tensor]) -> f64 {
    let mut worst = 0.0f64;
    for w in weights {
        let (_, n) = w.dims2().unwrap();
        for row in w.data().chunks(n) {
            let s: f64 = row.iter().map(|&v| v as f64).sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    worst
}

fn attention_normalization() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    let mut rows = 0usize;
    for i in 0..100 {
        let weights = if i % 4 == 3 {
            // the template fusion block with five concatenated slots
            let p = FusionParams::random(&mut r, 5 * MODEL_DIM, 6, 1.0).unwrap();
            let search = random_map(&mut r, MODEL_DIM, 10, 10);
            let kv = random_map(&mut r, 5 * MODEL_DIM, 5, 5);
            fuse_with_weights(&search, &kv, &p).unwrap().1
        } else {
            let heads = [1, 2, 3, 6][r.gen_range(0..4)];
            let d = heads * r.gen_range(2..9);
            let kv_dim = r.gen_range(1..40);
            let p = AttentionParams::random(&mut r, d, kv_dim, heads).unwrap();
            let (nq, nk) = (r.gen_range(1..50), r.gen_range(1..50));
            let scale = r.gen_range(0.1..8.0);
            let q = random_tensor(&mut r, &[nq, d]).scale(scale);
            let k = random_tensor(&mut r, &[nk, kv_dim]).scale(scale);
            let v = random_tensor(&mut r, &[nk, kv_dim]);
            multi_head_attention_with_weights(&q, &k, &v, &p).unwrap().1
        };
        rows += weights.iter().map(|w| w.shape()[0]).sum::<usize>();
        worst = worst.max(row_sum_error(&weights));
    }
    outcome(worst <= 1e-6, format!("worst |row sum - 1| = {worst:.2e} over {rows} rows"))
}

fn shape_contract() -> Outcome {
    let cfg = RunConfig::default();
    let model = TrackerModel::new(&cfg).unwrap();
    let mut r = rng(3);
    let search = model.features(&noise_image(&mut r, SEARCH_SIZE)).unwrap();
    let slots: Vec<FeatureMap> =
        (0..5).map(|_| model.features(&noise_image(&mut r, TEMPLATE_SIZE)).unwrap()).collect();
    let kv = build_template_kv(&TemplateFeatures::new(slots.clone()).unwrap()).unwrap();
    let refs: Vec<&FeatureMap> = slots.iter().collect();
    let fused = model.fuse(&search, &refs, &cfg, &model.fusion_for(&cfg).unwrap()).unwrap();
    let ok = search.dims() == (192, 20, 20) && kv.dims() == (960, 5, 5) && fused.map.dims() == (192, 20, 20);
    outcome(
        ok,
        format!("search {:?}, template K/V {:?}, fused {:?}", search.dims(), kv.dims(), fused.map.dims()),
    )
}

/// Jittered stratified sampling over the enclosing box.
fn giou_monte_carlo(a: &BBox, b: &BBox, r: &mut ChaCha8Rng, n: usize) -> f64 {
    let x0 = a.x.min(b.x);
    let y0 = a.y.min(b.y);
    let cw = (a.x + a.w).max(b.x + b.w) - x0;
    let ch = (a.y + a.h).max(b.y + b.h) - y0;
    let inside = |bx: &BBox, px: f64, py: f64| px >= bx.x && px < bx.x + bx.w && py >= bx.y && py < bx.y + bx.h;
    let (mut inter, mut union) = (0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            let px = x0 + (i as f64 + r.gen::<f64>()) / n as f64 * cw;
            let py = y0 + (j as f64 + r.gen::<f64>()) / n as f64 * ch;
            let (ia, ib) = (inside(a, px, py), inside(b, px, py));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    let total = (n * n) as f64;
    inter as f64 / union as f64 - (total - union as f64) / total
}

fn giou_oracle() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let bx = |r: &mut ChaCha8Rng| BBox::new(r.gen_range(0.0..60.0), r.gen_range(0.0..60.0), r.gen_range(2.0..40.0), r.gen_range(2.0..40.0));
        let (a, b) = (bx(&mut r), bx(&mut r));
        worst = worst.max((giou(&a, &b) - giou_monte_carlo(&a, &b, &mut r, 500)).abs());
    }
    let a = BBox::new(3.5, -2.0, 17.25, 9.0);
    let self_one = giou(&a, &a) == 1.0;
    let unit = BBox::new(0.0, 0.0, 1.0, 1.0);
    let separated = giou(&unit, &BBox::new(9.0, 0.0, 1.0, 1.0));
    let nested = giou(&BBox::new(0.0, 0.0, 2.0, 2.0), &BBox::new(0.0, 0.0, 2.0, 1.0));
    let hand = (separated + 0.8).abs() < 1e-12 && (nested - 0.5).abs() < 1e-12;
    outcome(
        worst < 1e-3 && self_one && hand,
        format!("worst |giou - sampled| = {worst:.2e}, giou(A,A)=1: {self_one}, separated {separated}, nested {nested}"),
    )
}

fn gradient_check() -> Outcome {
    let started = Instant::now();
    let mut r = rng(5);
    let head = HeadParams::random(&mut r, 192, 192);
    let map = random_map(&mut r, 192, 5, 5);
    let gt = BBox::new(18.0, 13.0, 41.0, 37.0);
    let obj = HeadObjective::new(head.layout(), &map, Some(gt), LossWeights::default()).unwrap();
    let theta = head.to_flat();
    let ev = obj.evaluate(&theta).unwrap();
    let probe = obj.probe(&theta).unwrap();
    let err = grad_check_coordinates(|i, v| probe.loss_with(i, v).unwrap(), &theta, &ev.grad, 1e-4);
    let elapsed = started.elapsed();
    let w = LossWeights::default();
    let weights_ok = (w.cls, w.iou, w.reg) == (5.0, 2.0, 2.0);
    outcome(
        err < 1e-3 && weights_ok && elapsed < Duration::from_secs(30),
        format!("{} parameters, worst relative error {err:.2e}, {elapsed:.2?}", theta.len()),
    )
}

/// Straight-line restatement of smoothing, correction and the FIFO update
/// over plain arrays.
struct OracleState {
    prev: Option<[f64; 4]>,
    stable: Option<[f64; 4]>,
    slots: [u32; 5],
    frame: usize,
}

fn centre(b: [f64; 4]) -> (f64, f64) {
    (b[0] + b[2] / 2.0, b[1] + b[3] / 2.0)
}

fn temporal_oracle() -> Outcome {
    let mut r = rng(6);
    let mut steps = 0;
    let mut failures = Vec::new();
    let (mut resets, mut pushes) = (0, 0);
    for episode in 0..20 {
        let cfg = TrackerConfig {
            alpha: [0.0, 0.3, 0.7, 1.0][r.gen_range(0..4)],
            theta_d: r.gen_range(0.2..1.0),
            theta_s: r.gen_range(1.2..3.0),
            update_interval: [1, 3, 10][r.gen_range(0..3)],
            conf_th: [0.3, 0.6, 0.9][r.gen_range(0..3)],
            enable_smoothing: r.gen_bool(0.8),
            enable_correction: r.gen_bool(0.8),
            two_sided_scale: r.gen_bool(0.3),
        };
        let init = BBox::new(100.0, 100.0, 30.0, 20.0);
        let mut st = TrackerState::initialized(init, TemplateBank::new(0u32, 0)).unwrap();
        let mut o = OracleState { prev: Some(init.as_array()), stable: Some(init.as_array()), slots: [0; 5], frame: 1 };
        let mut next_id = 1u32;
        for _ in 0..500 {
            steps += 1;
            let p = o.prev.unwrap();
            let (pcx, pcy) = centre(p);
            let jump = if r.gen_bool(0.2) { 1.5 } else { 0.2 };
            let spread = jump * p[2].hypot(p[3]);
            let (w, h) = (p[2] * r.gen_range(0.5..2.2), p[3] * r.gen_range(0.5..2.2));
            let y_i = BBox::from_center(
                pcx + r.gen_range(-spread..spread),
                pcy + r.gen_range(-spread..spread),
                w.clamp(2.0, 200.0),
                h.clamp(2.0, 200.0),
            );
            let conf: f64 = r.gen();
            let (fail_c, fail_u) = (r.gen_bool(0.1), r.gen_bool(0.1));
            let (id_c, id_u) = (next_id, next_id + 1);
            next_id += 2;

            let y_is = st.smooth(&y_i, &cfg).unwrap();
            let yi = y_i.as_array();
            let ys = match o.prev {
                Some(p) if cfg.enable_smoothing => {
                    let a = cfg.alpha;
                    [0, 1, 2, 3].map(|k| a * yi[k] + (1.0 - a) * p[k])
                }
                _ => yi,
            };

            let corr = st
                .correct(&y_is, &cfg, |_| if fail_c { Err(Error::Extraction("test".into())) } else { Ok(id_c) })
                .unwrap();
            let mut yic = ys;
            let mut reset = false;
            if let (true, Some(p)) = (cfg.enable_correction, o.prev) {
                let ((cx, cy), (px, py)) = (centre(ys), centre(p));
                let d = ((cx - px).powi(2) + (cy - py).powi(2)).sqrt();
                let ratio = (ys[2] * ys[3]) / (p[2] * p[3]);
                let limit = cfg.theta_d * (p[2] * p[2] + p[3] * p[3]).sqrt();
                let bad = d > limit || ratio > cfg.theta_s || (cfg.two_sided_scale && ratio < 1.0 / cfg.theta_s);
                if bad {
                    yic = o.stable.unwrap_or(p);
                    if !fail_c {
                        for s in &mut o.slots[1..] {
                            *s = id_c;
                        }
                        reset = true;
                    }
                } else {
                    o.stable = Some(ys);
                }
            }
            o.prev = Some(yic);
            if corr.templates_reset {
                resets += 1;
                let dynamic: Vec<u32> = st.bank().dynamic_slots().map(|s| s.entry).collect();
                if dynamic.iter().any(|v| *v != dynamic[0]) {
                    failures.push(format!("episode {episode}: dynamic slots differ after reset"));
                }
            }

            let pushed = st
                .update(&corr.y_ic, conf, &cfg, |_| if fail_u { Err(Error::Extraction("test".into())) } else { Ok(id_u) })
                .unwrap();
            let mut expect_push = false;
            if o.frame % cfg.update_interval == 0 && conf >= cfg.conf_th && !fail_u {
                o.slots = [o.slots[0], o.slots[2], o.slots[3], o.slots[4], id_u];
                expect_push = true;
            }
            o.frame += 1;
            pushes += usize::from(pushed);

            let bank: Vec<u32> = st.bank().slots().map(|s| s.entry).collect();
            let agree = y_is.as_array() == ys
                && corr.y_ic.as_array() == yic
                && corr.templates_reset == reset
                && st.s_stable().map(|b| b.as_array()) == o.stable
                && bank == o.slots
                && pushed == expect_push
                && st.bank().static_slot().entry == 0
                && st.bank().static_slot().source_frame == 0;
            if !agree && failures.len() < 5 {
                failures.push(format!("episode {episode} frame {}: bank {bank:?} vs {:?}", o.frame - 1, o.slots));
            }
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{steps} steps agree ({resets} template resets, {pushes} FIFO pushes)")
        } else {
            failures.join("; ")
        },
    )
}

fn smoothing_algebra() -> Outcome {
    let mut r = rng(7);
    let bx = |r: &mut ChaCha8Rng| BBox::new(r.gen_range(-500.0..500.0), r.gen_range(-500.0..500.0), r.gen_range(0.1..300.0), r.gen_range(0.1..300.0));
    let mut endpoint_fail = 0;
    let mut hull_fail = 0;
    for _ in 0..10_000 {
        let (y, p) = (bx(&mut r), bx(&mut r));
        let at = |alpha: f64| smooth_box(&y, Some(&p), &TrackerConfig { alpha, ..TrackerConfig::default() });
        endpoint_fail += usize::from(at(1.0) != y || at(0.0) != p);
        let s = at(r.gen_range(0.0..=1.0));
        let inside = s
            .as_array()
            .iter()
            .zip(y.as_array())
            .zip(p.as_array())
            .all(|((v, a), b)| *v >= a.min(b) && *v <= a.max(b));
        hull_fail += usize::from(!inside);
    }
    outcome(
        endpoint_fail == 0 && hull_fail == 0,
        format!("endpoint mismatches {endpoint_fail}, convex-envelope violations {hull_fail} over 10000 triples"),
    )
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

/// `key = a/b` lines of the expected-values file.
fn read_expected(path: &Path) -> Vec<(String, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            let (a, b) = v.trim().split_once('/').unwrap();
            (k.trim().to_string(), a.trim().parse::<f64>().unwrap() / b.trim().parse::<f64>().unwrap())
        })
        .collect()
}

fn evaluator_golden() -> Outcome {
    let dir = fixture_dir();
    let report = evaluate(&read_results(&dir.join("pred.txt"), &dir.join("gt.txt")).unwrap()).unwrap();
    let got: std::collections::HashMap<&str, f64> = report.summary().into_iter().collect();
    // count ratios come out bit-equal; AO is a float mean of IoUs and may sit
    // one rounding step from the decimal hand value
    let (mut diffs, mut bit_equal, mut n) = (Vec::new(), Vec::new(), 0);
    for (k, want) in read_expected(&dir.join("expected.txt")) {
        n += 1;
        let have = got[k.as_str()];
        if have == want {
            bit_equal.push(k);
        } else if (have - want).abs() > 2.0 * f64::EPSILON * want.abs() {
            diffs.push(format!("{k} {have} vs {want}"));
        }
    }
    outcome(
        diffs.is_empty() && n == 5,
        if diffs.is_empty() {
            format!("{n} metrics match hand values, bit-equal: {}", bit_equal.join(" "))
        } else {
            diffs.join(", ")
        },
    )
}

struct Ablation {
    auc: f64,
    elapsed: Duration,
}

fn ablation_run(run: &RunConfig) -> Ablation {
    let started = Instant::now();
    let seqs = generate(&pinned_suite()).unwrap();
    let (model, _) = finetune(run).unwrap();
    let (report, _) = run_suite(&model, run, &seqs).unwrap();
    Ablation { auc: report.success_auc, elapsed: started.elapsed() }
}

fn ablation_direction(full: &Ablation) -> Outcome {
    let base = ablation_run(&RunConfig::baseline());
    let margin = full.auc - base.auc;
    let elapsed = base.elapsed + full.elapsed;
    let steps = RunConfig::default().train.steps;
    outcome(
        margin >= 0.02 && steps <= 500 && elapsed < Duration::from_secs(600),
        format!(
            "full {:.4} vs baseline {:.4}, margin {margin:+.4}, {steps} fine-tuning steps, {elapsed:.1?}",
            full.auc, base.auc
        ),
    )
}

fn template_trend(full: &Ablation) -> Outcome {
    let mut aucs = Vec::new();
    for m in 2..5 {
        aucs.push(ablation_run(&RunConfig { templates: m, ..RunConfig::default() }).auc);
    }
    aucs.push(full.auc);
    let ok = aucs.windows(2).all(|w| w[1] >= w[0] - 0.01);
    let shown: Vec<String> = aucs.iter().zip(2..).map(|(a, m)| format!("{m}:{a:.4}")).collect();
    outcome(ok, format!("success AUC by template count {}", shown.join(" ")))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_siamtrack")
}

fn run_cli(args: &[&str], dir: &Path) -> (i32, Vec<u8>) {
    let out = Command::new(bin()).args(args).current_dir(dir).env_remove("SIAMTRACK_LOG").output().unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

/// Runs every command in a fresh directory and returns the exit codes,
/// stdout and output files in a fixed order.
fn cli_session() -> Vec<(String, Vec<u8>)> {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("run.cfg"),
        "seed = 11\nwidth = 160\nheight = 160\nframes = 12\nocclusions = 5-7:full\n\
         head_hidden = 16\ntrain_steps = 4\ntrain_samples = 4\ntrain_sequences = 2\nparams = params.bin\n",
    )
    .unwrap();
    let mut out = Vec::new();
    let mut record = |name: &str, (code, stdout): (i32, Vec<u8>)| {
        out.push((format!("{name} exit"), code.to_string().into_bytes()));
        out.push((format!("{name} stdout"), stdout));
    };
    record("synth", run_cli(&["synth", "--config", "run.cfg", "--out", "seq"], d));
    record("finetune", run_cli(&["finetune", "--config", "run.cfg", "--set", "params=", "--out", "params.bin"], d));
    record("track", run_cli(&["track", "--seq", "seq", "--config", "run.cfg", "--out", "results.txt"], d));
    record("eval", run_cli(&["eval", "--results", "results.txt", "--gt", "seq/groundtruth.txt"], d));
    record("eval json", run_cli(&["eval", "--results", "results.txt", "--gt", "seq/groundtruth.txt", "--json"], d));
    record("eval csv", run_cli(&["eval", "--results", "results.txt", "--gt", "seq/groundtruth.txt", "--csv"], d));
    record("bench", run_cli(&["bench", "--config", "run.cfg", "--set", "params="], d));
    let mut files: Vec<PathBuf> = std::fs::read_dir(d.join("seq")).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files.push(d.join("params.bin"));
    files.push(d.join("results.txt"));
    for f in files {
        let name = f.strip_prefix(d).unwrap().display().to_string();
        out.push((name, std::fs::read(&f).unwrap_or_default()));
    }
    out
}

fn determinism() -> Outcome {
    let (a, b) = (cli_session(), cli_session());
    let failed: Vec<&str> = a.iter().filter(|(_, v)| v == b"1" || v == b"2" || v == b"3").map(|(k, _)| k.as_str()).collect();
    let differing: Vec<&str> =
        a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    let ok = a.len() == b.len() && differing.is_empty() && failed.is_empty();
    outcome(
        ok,
        if ok {
            format!("{} outputs byte-identical across two runs of synth, finetune, track, eval, bench", a.len())
        } else {
            format!("differing: {differing:?}, failing: {failed:?}")
        },
    )
}

fn counted<T>(f: impl FnOnce() -> T) -> (T, u64) {
    reset_mac_count();
    let v = f();
    (v, mac_count())
}

fn complexity_accounting() -> Outcome {
    let mut r = rng(12);
    let mut notes = Vec::new();
    let mut ok = true;

    let x = random_map(&mut r, 232, 20, 20);
    let (_, n) = counted(|| conv1x1(&x, &random_tensor(&mut r, &[192, 232]), &Tensor::zeros(&[192])).unwrap());
    ok &= n == 17_817_600;
    notes.push(format!("conv1x1 {n}"));

    let (_, n) = counted(|| linear(&random_tensor(&mut r, &[192]), &random_tensor(&mut r, &[48, 192]), &Tensor::zeros(&[48])).unwrap());
    ok &= n == 48 * 192;
    notes.push(format!("linear {n}"));

    let (d, kv, nq, nk) = (192u64, 960u64, 400u64, 25u64);
    let p = AttentionParams::random(&mut r, d as usize, kv as usize, 6).unwrap();
    let q = random_tensor(&mut r, &[nq as usize, d as usize]);
    let k = random_tensor(&mut r, &[nk as usize, kv as usize]);
    let (_, n) = counted(|| multi_head_attention_with_weights(&q, &k, &k, &p).unwrap());
    let want = nq * d * d + 2 * nk * kv * d + 2 * nq * nk * d + nq * d * d;
    ok &= n == want;
    notes.push(format!("attention {n}"));

    let p = AttentionParams::random(&mut r, 192, 192, 6).unwrap();
    let qm = random_map(&mut r, 192, 20, 20);
    let km = random_map(&mut r, 192, 40, 40);
    let (_, n) = counted(|| pa_block(&qm, &km, &km, 4, &p).unwrap());
    let (nq, nk) = (400u64, 100u64);
    let want = 2 * nq * d * d + 2 * nk * d * d + 2 * nq * nk * d + 2 * nq * d * 4 * d;
    ok &= n == want;
    notes.push(format!("pooled block {n}"));

    let mut all_match = true;
    for cfg in [
        RunConfig::default(),
        RunConfig { combine: CombineMode::Sum, ..RunConfig::default() },
        RunConfig { templates: 3, mpa: false, ..RunConfig::default() },
        RunConfig::baseline(),
    ] {
        let model = TrackerModel::new(&cfg).unwrap();
        all_match &= measure(&model, &cfg, SEARCH_SIZE, TEMPLATE_SIZE).unwrap() == analytic(&cfg, SEARCH_SIZE, TEMPLATE_SIZE);
    }
    ok &= all_match;
    notes.push(format!("pipeline measured == closed form: {all_match}"));

    let concat = analytic(&RunConfig::default(), SEARCH_SIZE, TEMPLATE_SIZE).total().params;
    let sum = analytic(&RunConfig { combine: CombineMode::Sum, ..RunConfig::default() }, SEARCH_SIZE, TEMPLATE_SIZE)
        .total()
        .params;
    ok &= concat > sum;
    notes.push(format!("params concat {concat} > sum {sum}"));
    outcome(ok, notes.join(", "))
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |i: usize| only.as_ref().is_none_or(|v| v.contains(&i));
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let full = (wanted(9) || wanted(10)).then(|| ablation_run(&RunConfig::default()));
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "mpa residual identity", Box::new(mpa_residual_identity)),
        (2, "attention normalization", Box::new(attention_normalization)),
        (3, "shape contract", Box::new(shape_contract)),
        (4, "giou oracle", Box::new(giou_oracle)),
        (5, "gradient check", Box::new(gradient_check)),
        (6, "temporal state machine oracle", Box::new(temporal_oracle)),
        (7, "smoothing algebra", Box::new(smoothing_algebra)),
        (8, "evaluator golden file", Box::new(evaluator_golden)),
        (9, "ablation direction", Box::new(|| ablation_direction(full.as_ref().unwrap()))),
        (10, "template-count trend", Box::new(|| template_trend(full.as_ref().unwrap()))),
        (11, "determinism", Box::new(determinism)),
        (12, "complexity accounting", Box::new(complexity_accounting)),
    ];
    let (mut passed, mut ran) = (0, 0);
    for (i, name, check) in criteria {
        if !wanted(i) {
            continue;
        }
        let o = check();
        ran += 1;
        passed += usize::from(o.pass);
        println!("criterion {i:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {passed}/{ran} criteria pass");
    if strict && passed != ran {
        std::process::exit(1);
    }
}
