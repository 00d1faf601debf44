//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Run with `cargo test -p honeyscan-cli --test acceptance -- --nocapture`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use honeyscan::augment::{augment_dataset, temperature_fluctuate, AugmentScope, FluctuationMode, FluctuationSpec};
use honeyscan::dataset::{
    generate_synthetic, load_manifest, AdulterationLevel, Manifest, SampleRecord, Split,
};
use honeyscan::imaging::{build_roi_mask, detect_edges, preprocess, read_image, to_grayscale, write_image, Image, Mask};
use honeyscan::optim::{bce_loss, compute_metrics};
use honeyscan::rng::SplitMix64;
use honeyscan::tensor::*;
use honeyscan::trainkit::{
    backward, build_model, forward, forward_pass, load_checkpoint, predict, save_checkpoint, Checkpoint,
    CheckpointError, ImageSet, ModelDef, ModelParams, TrainConfig,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn honeyscan(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_honeyscan")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Result<String, String> {
    let o = honeyscan(args);
    if o.status.success() {
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    } else {
        Err(format!("`{}` exited {:?}: {}", args.join(" "), o.status.code(), String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

// ---------------------------------------------------------------- gradients

const STEP: f64 = 1e-5;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn random(shape: &[usize], rng: &mut SplitMix64, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.uniform(lo, hi)).unwrap()
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Worst relative error between `analytic` and central differences of `loss`.
fn worst(x: &Tensor<f64>, analytic: &Tensor<f64>, loss: impl Fn(&Tensor<f64>) -> f64) -> f64 {
    assert_eq!(x.shape(), analytic.shape());
    (0..x.len())
        .map(|i| {
            let mut plus = x.clone();
            plus.data_mut()[i] += STEP;
            let mut minus = x.clone();
            minus.data_mut()[i] -= STEP;
            rel_err(analytic.data()[i], (loss(&plus) - loss(&minus)) / (2.0 * STEP))
        })
        .fold(0.0, f64::max)
}

fn layer_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::new();

    let x = random(&[2, 2, 5, 6], &mut rng, -1.0, 1.0);
    let conv = ConvParams::new(random(&[3, 2, 3, 3], &mut rng, -1.0, 1.0), random(&[3], &mut rng, -1.0, 1.0)).unwrap();
    let r = random(&[2, 3, 5, 6], &mut rng, -1.0, 1.0);
    let g = conv2d_backward(&x, &conv, &r).unwrap();
    let mut e = worst(&x, &g.grad_input, |x| dot(&conv2d_forward(x, &conv).unwrap(), &r));
    e = e.max(worst(&conv.kernels, &g.grad_kernels, |k| {
        dot(&conv2d_forward(&x, &ConvParams::new(k.clone(), conv.bias.clone()).unwrap()).unwrap(), &r)
    }));
    e = e.max(worst(&conv.bias, &g.grad_bias, |b| {
        dot(&conv2d_forward(&x, &ConvParams::new(conv.kernels.clone(), b.clone()).unwrap()).unwrap(), &r)
    }));
    out.push(("conv", e));

    let n = 2 * 2 * 5 * 7;
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let x = Tensor::new(&[2, 2, 5, 7], order.iter().map(|&i| i as f64 * 0.01 - 1.0).collect()).unwrap();
    let (pooled, idx) = maxpool2d(&x).unwrap();
    let r = random(pooled.shape(), &mut rng, -1.0, 1.0);
    let g = maxpool2d_backward(&idx, &r).unwrap();
    out.push(("pool", worst(&x, &g, |x| dot(&maxpool2d(x).unwrap().0, &r))));

    let x = random(&[3, 2, 3, 4], &mut rng, -2.0, 2.0);
    let mut bn = BatchNormState::<f64>::new(2).unwrap();
    bn.gamma = random(&[2], &mut rng, 0.5, 1.5);
    bn.beta = random(&[2], &mut rng, -0.5, 0.5);
    let r = random(x.shape(), &mut rng, -1.0, 1.0);
    let (_, _, cache) = batchnorm2d(&x, &bn).unwrap();
    let g = batchnorm2d_backward(&cache, &bn, &r).unwrap();
    let mut e = worst(&x, &g.grad_input, |x| dot(&batchnorm2d(x, &bn).unwrap().0, &r));
    e = e.max(worst(&bn.gamma, &g.grad_gamma, |gm| {
        dot(&batchnorm2d(&x, &BatchNormState { gamma: gm.clone(), ..bn.clone() }).unwrap().0, &r)
    }));
    e = e.max(worst(&bn.beta, &g.grad_beta, |b| {
        dot(&batchnorm2d(&x, &BatchNormState { beta: b.clone(), ..bn.clone() }).unwrap().0, &r)
    }));
    out.push(("batchnorm", e));

    let x = random(&[4, 7], &mut rng, -1.0, 1.0);
    let dense = DenseParams::new(random(&[7, 3], &mut rng, -1.0, 1.0), random(&[3], &mut rng, -1.0, 1.0)).unwrap();
    let r = random(&[4, 3], &mut rng, -1.0, 1.0);
    let g = dense_backward(&x, &dense, &r).unwrap();
    let mut e = worst(&x, &g.grad_input, |x| dot(&dense_forward(x, &dense).unwrap(), &r));
    e = e.max(worst(&dense.weights, &g.grad_weights, |w| {
        dot(&dense_forward(&x, &DenseParams::new(w.clone(), dense.bias.clone()).unwrap()).unwrap(), &r)
    }));
    e = e.max(worst(&dense.bias, &g.grad_bias, |b| {
        dot(&dense_forward(&x, &DenseParams::new(dense.weights.clone(), b.clone()).unwrap()).unwrap(), &r)
    }));
    out.push(("dense", e));

    let x = Tensor::from_fn(&[3, 17], |_| {
        let m = rng.uniform(0.05, 1.0);
        if rng.next_u64() & 1 == 0 { m } else { -m }
    })
    .unwrap();
    let r = random(x.shape(), &mut rng, -1.0, 1.0);
    let g = relu_backward(&x, &r).unwrap();
    out.push(("relu", worst(&x, &g, |x| dot(&relu(x), &r))));

    let x = random(&[5, 4], &mut rng, -6.0, 6.0);
    let r = random(x.shape(), &mut rng, -1.0, 1.0);
    let g = sigmoid_backward(&sigmoid(&x), &r).unwrap();
    out.push(("sigmoid", worst(&x, &g, |x| dot(&sigmoid(x), &r))));

    let p = random(&[8, 1], &mut rng, 0.05, 0.95);
    let labels: Vec<f64> = (0..8).map(|_| (rng.next_u64() & 1) as f64).collect();
    let (_, g) = bce_loss(&p, &labels).unwrap();
    out.push(("bce", worst(&p, &g, |p| bce_loss(p, &labels).unwrap().0)));
    out
}

fn end_to_end_error() -> (f64, usize) {
    let def = ModelDef::proposed().with_input(36, 36);
    let mut worst_e: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..2u64 {
        let mut rng = SplitMix64::new(500 + seed);
        let params: ModelParams<f64> = build_model(&def, seed).unwrap();
        let x = random(&def.input_shape(4), &mut rng, 0.0, 1.0);
        let y = [1.0, 0.0, 0.0, 1.0];
        let loss = |p: &ModelParams<f64>| {
            bce_loss(&forward_pass(&def, p, &x, Mode::Training, false).unwrap().probabilities, &y).unwrap().0
        };
        let pass = forward_pass(&def, &params, &x, Mode::Training, true).unwrap();
        let (_, g) = bce_loss(&pass.probabilities, &y).unwrap();
        let grads = backward(&params, &pass, &g).unwrap();
        let learnable = params.learnable();
        for k in 0..30 {
            let t = if k < learnable.len() { k } else { rng.below(learnable.len()) };
            let i = rng.below(learnable[t].len());
            let eval = |delta: f64| {
                let mut tensors = learnable.clone();
                tensors[t].data_mut()[i] += delta;
                let mut p = params.clone();
                p.set_learnable(tensors).unwrap();
                loss(&p)
            };
            let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
            worst_e = worst_e.max(rel_err(grads[t].data()[i], numeric));
            checked += 1;
        }
    }
    (worst_e, checked)
}

fn c1_gradients() -> Outcome {
    let started = Instant::now();
    let mut per_layer: Vec<(&str, f64)> = Vec::new();
    for seed in 0..20 {
        for (name, e) in layer_errors(seed) {
            match per_layer.iter_mut().find(|(n, _)| *n == name) {
                Some(entry) => entry.1 = entry.1.max(e),
                None => per_layer.push((name, e)),
            }
        }
    }
    let (e2e, checked) = end_to_end_error();
    let elapsed = started.elapsed();
    let layer_max = per_layer.iter().map(|p| p.1).fold(0.0, f64::max);
    let detail: Vec<String> = per_layer.iter().map(|(n, e)| format!("{n}={e:.1e}")).collect();
    ensure(layer_max <= 1e-4, || format!("layer error {layer_max:.2e} > 1e-4 ({})", detail.join(" ")))?;
    ensure(e2e <= 1e-3, || format!("end-to-end error {e2e:.2e} > 1e-3"))?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {:.1}s", elapsed.as_secs_f64()))?;
    Ok(format!(
        "20 seeds per layer, worst {} ; end-to-end {e2e:.1e} over {checked} params ; {:.1}s",
        detail.join(" "),
        elapsed.as_secs_f64()
    ))
}

// ------------------------------------------------------------- augmentation

fn c2_augmentation() -> Outcome {
    let started = Instant::now();
    let mut rng = SplitMix64::new(77);
    let img = Image::new(1000, 1000, 1, (0..1_000_000).map(|_| rng.below(256) as u8).collect()).unwrap();
    let spec = FluctuationSpec { amplitude: 5, mode: FluctuationMode::PerPixel, seed: 11 };
    let out = temperature_fluctuate(&img, &spec);
    let mut counts = [0u64; 11];
    let mut interior = 0u64;
    for (&a, &b) in img.pixels().iter().zip(out.pixels()) {
        let d = i32::from(b) - i32::from(a);
        ensure(d.abs() <= 5, || format!("|delta| {} at value {a}", d.abs()))?;
        if (5..=250).contains(&a) {
            counts[(d + 5) as usize] += 1;
            interior += 1;
        }
    }
    let worst_dev = counts.iter().map(|&c| (c as f64 / interior as f64 - 1.0 / 11.0).abs()).fold(0.0, f64::max);
    ensure(worst_dev <= 0.005, || format!("frequency deviation {worst_dev:.4}"))?;
    let identity = temperature_fluctuate(&img, &FluctuationSpec { amplitude: 0, ..spec });
    ensure(identity == img, || "A=0 changed the image".into())?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {:.1}s", elapsed.as_secs_f64()))?;
    Ok(format!(
        "10^6 pixels, max |delta| 5, worst frequency deviation {worst_dev:.4} over {interior} non-saturating, A=0 identity ; {:.1}s",
        elapsed.as_secs_f64()
    ))
}

// ------------------------------------------------------------- study counts

fn c3_study_counts() -> Outcome {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let img = Image::filled(4, 4, 3, 100).unwrap();
    let mut records = Vec::new();
    for (level, n) in [
        (AdulterationLevel::Pure, 150),
        (AdulterationLevel::Pct10, 75),
        (AdulterationLevel::Pct25, 75),
        (AdulterationLevel::Pct50, 60),
    ] {
        for i in 0..n {
            let path = format!("{}_{i}.ppm", level.percent());
            write_image(&src.path().join(&path), &img).unwrap();
            records.push(SampleRecord {
                path,
                level,
                sample_id: format!("{}-{}", level.percent(), i / 10),
                split: Split::Unassigned,
                augmented: false,
            });
        }
    }
    let manifest = Manifest::new(records);
    let levels = manifest.level_counts();
    let before = manifest.class_counts();
    ensure(levels == [150, 75, 75, 60], || format!("level counts {levels:?}"))?;
    ensure(before == (150, 210), || format!("class totals {before:?}"))?;
    let report = augment_dataset(&manifest, src.path(), out.path(), &FluctuationSpec::default(), AugmentScope::TrainOnly)
        .map_err(|e| e.to_string())?;
    let after = report.manifest.class_counts();
    ensure(after == (300, 420) && report.manifest.len() == 720, || format!("augmented totals {after:?}"))?;
    Ok("150/75/75/60 -> 150/210 -> 300/420 = 720".into())
}

// ------------------------------------------------------------------ metrics

fn c4_metrics() -> Outcome {
    let (tp, tn, fp, fn_) = (415u64, 300u64, 0u64, 5u64);
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    for (n, p, y) in [(tp, 0.9, 1.0), (tn, 0.1, 0.0), (fp, 0.9, 0.0), (fn_, 0.1, 1.0)] {
        preds.extend(std::iter::repeat(p).take(n as usize));
        labels.extend(std::iter::repeat(y).take(n as usize));
    }
    let m = compute_metrics::<f64>(&preds, &labels, 0.5).map_err(|e| e.to_string())?;
    ensure((m.tp, m.tn, m.fp, m.fn_) == (tp, tn, fp, fn_), || format!("confusion {:?}", (m.tp, m.tn, m.fp, m.fn_)))?;
    ensure((m.accuracy - 0.9931).abs() <= 1e-4, || format!("accuracy {:.6}", m.accuracy))?;
    ensure(format!("{:.4}", m.precision) == "1.0000", || format!("precision {:.6}", m.precision))?;
    ensure((m.recall - 0.9881).abs() <= 1e-4, || format!("recall {:.6}", m.recall))?;
    Ok(format!("accuracy {:.4} precision {:.4} recall {:.4}", m.accuracy, m.precision, m.recall))
}

// ---------------------------------------------------------------------- ROI

fn c5_roi() -> Outcome {
    let started = Instant::now();
    let mut rng = SplitMix64::new(31337);
    let mut min_iou: f64 = 1.0;
    for k in 0..50 {
        let (w, h) = (300usize, 300usize);
        let r = rng.uniform(55.0, 110.0);
        let cx = rng.uniform(r + 5.0, w as f64 - r - 5.0);
        let cy = rng.uniform(r + 5.0, h as f64 - r - 5.0);
        let fg = 140 + rng.below(110) as i32;
        let bg = rng.below(50) as i32;
        let bits: Vec<bool> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2) <= r * r))
            .collect();
        let mut px = Vec::with_capacity(w * h * 3);
        for &inside in &bits {
            for _ in 0..3 {
                px.push(((if inside { fg } else { bg }) + rng.symmetric_int(3)).clamp(0, 255) as u8);
            }
        }
        let disk = Mask::new(w, h, bits).unwrap();
        let img = Image::new(w, h, 3, px).unwrap();
        let edges = detect_edges(&to_grayscale(&img).unwrap()).unwrap();
        let iou = build_roi_mask(&edges).map_err(|e| format!("fixture {k}: {e}"))?.iou(&disk);
        min_iou = min_iou.min(iou);
        let shaped = preprocess(&img).map_err(|e| format!("fixture {k}: {e}"))?;
        ensure((shaped.width(), shaped.height(), shaped.channels()) == (300, 300, 3), || {
            format!("fixture {k}: preprocess emitted {}x{}x{}", shaped.width(), shaped.height(), shaped.channels())
        })?;
    }
    let elapsed = started.elapsed();
    ensure(min_iou >= 0.95, || format!("minimum IoU {min_iou:.4}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {:.1}s", elapsed.as_secs_f64()))?;
    Ok(format!("50 disks, minimum IoU {min_iou:.4}, all 300x300x3 ; {:.1}s", elapsed.as_secs_f64()))
}

// -------------------------------------------------------------- shape trace

fn c6_shapes() -> Outcome {
    let def = ModelDef::proposed();
    let params = build_model::<f32>(&def, 0).map_err(|e| e.to_string())?;
    let x = Tensor::<f32>::zeros(&def.input_shape(1)).unwrap();
    let pass = forward_pass(&def, &params, &x, Mode::Inference, false).map_err(|e| e.to_string())?;
    let sizes: Vec<usize> = pass.trace.iter().map(|&(h, w)| {
        assert_eq!(h, w);
        h
    }).collect();
    ensure(sizes == [150, 75, 37, 18, 9], || format!("spatial trace {sizes:?}"))?;
    ensure(def.flatten_width() == 10368, || format!("flatten width {}", def.flatten_width()))?;
    // Closed form: five 3x3 convolutions, batch norm on the last three, one dense unit.
    let conv = |o: usize, i: usize| o * i * 9 + o;
    let closed = conv(18, 3) + conv(18, 18) + conv(32, 18) + conv(64, 32) + conv(128, 64) + 2 * (32 + 64 + 128) + 10368 + 1;
    ensure(def.parameter_count() == closed, || format!("counter {} vs closed form {closed}", def.parameter_count()))?;
    ensure(params.parameter_count() == closed, || format!("built model holds {}", params.parameter_count()))?;
    Ok(format!("trace {sizes:?}, flatten 10368, parameters {closed}"))
}

// ---------------------------------------------------------------- training

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace().find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
}

fn c7_training() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let manifest = data.join("manifest.csv");
    let model = tmp.path().join("model.thml");
    let started = Instant::now();
    run_ok(&["synth", "--per-class", "150", "--seed", "7", "--out", s(&data)])?;
    run_ok(&["split", "--manifest", s(&manifest), "--val-fraction", "0.25", "--seed", "7"])?;
    let log = run_ok(&[
        "train", "--manifest", s(&manifest), "--epochs", "10", "--lr", "0.001", "--batch-size", "32",
        "--optimizer", "adam", "--steps", "15", "--seed", "7", "--out", s(&model),
    ])?;
    let elapsed = started.elapsed();
    let last = log.lines().filter(|l| l.starts_with("epoch ")).last().ok_or("no epoch lines")?;
    let val_acc: f64 = field(last, "val_acc").ok_or("no val_acc")?.parse().map_err(|_| "bad val_acc")?;
    ensure(val_acc >= 0.95, || format!("final validation accuracy {val_acc:.4}"))?;
    ensure(elapsed <= Duration::from_secs(600), || format!("val_acc {val_acc:.4} but took {:.0}s", elapsed.as_secs_f64()))?;
    Ok(format!(
        "300 synthetic images, 10 epochs: validation accuracy {val_acc:.4} ; {:.0}s wall on {} core(s)",
        elapsed.as_secs_f64(),
        std::thread::available_parallelism().map_or(1, |n| n.get())
    ))
}

// -------------------------------------------------------------- determinism

fn collect_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pipeline(root: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let raw = root.join("raw");
    let pre = root.join("pre");
    let aug = root.join("aug");
    let model = root.join("model").join("m.thml");
    run_ok(&["synth", "--per-class", "4", "--seed", "21", "--out", s(&raw)])?;
    run_ok(&["preprocess", "--manifest", s(&raw.join("manifest.csv")), "--out", s(&pre)])?;
    run_ok(&["split", "--manifest", s(&pre.join("manifest.csv")), "--val-fraction", "0.25", "--seed", "21"])?;
    run_ok(&["augment", "--manifest", s(&pre.join("manifest.csv")), "--seed", "21", "--out", s(&aug)])?;
    run_ok(&[
        "train", "--manifest", s(&aug.join("manifest.csv")), "--epochs", "2", "--steps", "2", "--batch-size", "4",
        "--seed", "21", "--out", s(&model),
    ])?;
    Ok(collect_files(root))
}

fn c8_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = pipeline(a.path())?;
    let fb = pipeline(b.path())?;
    let names: Vec<_> = fa.iter().map(|f| f.0.clone()).collect();
    ensure(names == fb.iter().map(|f| f.0.clone()).collect::<Vec<_>>(), || "different file sets".into())?;
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        ensure(x == y, || format!("{} differs between runs", name.display()))?;
    }
    let has = |suffix: &str| names.iter().any(|n| n.to_string_lossy().ends_with(suffix));
    ensure(has("_aug.ppm") && has("m.history.csv") && has("m.thml"), || "pipeline outputs missing".into())?;
    let manifest = load_manifest(&a.path().join("aug/manifest.csv")).map_err(|e| e.to_string())?;
    Ok(format!("{} files byte-identical across two runs ({} manifest records)", fa.len(), manifest.len()))
}

// -------------------------------------------------------------- persistence

fn c9_persistence() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let manifest = generate_synthetic(2, 5, &data).map_err(|e| e.to_string())?;
    let def = ModelDef::proposed();
    let set = ImageSet::load(&manifest, &data, &def).map_err(|e| e.to_string())?;
    let params = build_model::<f32>(&def, 9).map_err(|e| e.to_string())?;
    let path = tmp.path().join("m.thml");
    save_checkpoint(&path, &Checkpoint { def: def.clone(), config: TrainConfig::default(), params: params.clone() })
        .map_err(|e| e.to_string())?;
    let loaded = load_checkpoint(&path).map_err(|e| e.to_string())?;
    let before: Vec<u32> = predict(&def, &params, &set, 4).unwrap().iter().map(|p| p.to_bits()).collect();
    let after: Vec<u32> = predict(&loaded.def, &loaded.params, &set, 4).unwrap().iter().map(|p| p.to_bits()).collect();
    ensure(before == after, || "predictions differ after reload".into())?;
    let single = forward(&loaded.def, &loaded.params, &set.batch::<f32>(&[0]).unwrap(), Mode::Inference).unwrap();
    ensure(single.data()[0].to_bits() == before[0], || "single-image prediction differs".into())?;

    let mut bytes = std::fs::read(&path).unwrap();
    let at = bytes.len() / 3;
    bytes[at] ^= 0x10;
    let bad = tmp.path().join("bad.thml");
    std::fs::write(&bad, &bytes).unwrap();
    ensure(matches!(load_checkpoint(&bad), Err(CheckpointError::CrcMismatch { .. })), || "flip not reported as CRC mismatch".into())?;
    let image = data.join(&manifest.records[0].path);
    let o = honeyscan(&["predict", "--model", s(&bad), "--image", s(&image)]);
    ensure(o.status.code() == Some(2), || format!("corrupted checkpoint exited {:?}", o.status.code()))?;
    let stderr = String::from_utf8_lossy(&o.stderr).to_lowercase();
    ensure(stderr.contains("crc"), || format!("stderr lacks CRC: {stderr}"))?;
    let o = honeyscan(&["eval", "--model", s(&bad), "--manifest", s(&data.join("missing.csv"))]);
    ensure(o.status.code() == Some(2), || format!("eval on corrupted checkpoint exited {:?}", o.status.code()))?;
    let _ = read_image(&image).map_err(|e| e.to_string())?;
    Ok(format!("{} predictions bit-identical after reload; corrupted file rejected via CRC, exit 2", before.len()))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("C1 gradient correctness", c1_gradients),
        ("C2 augmentation contract", c2_augmentation),
        ("C3 study counts", c3_study_counts),
        ("C4 metrics consistency", c4_metrics),
        ("C5 ROI oracle", c5_roi),
        ("C6 shape trace", c6_shapes),
        ("C7 end-to-end synthetic training", c7_training),
        ("C8 determinism", c8_determinism),
        ("C9 persistence", c9_persistence),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
