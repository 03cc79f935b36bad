//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines are always shown.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sandshape::dataset::{
    extract_all, extract_demo, extract_triplets, smooth_positions, split_motions, synthesize_demos, Demo,
    ExtractConfig, MotionSet, SynthConfig,
};
use sandshape::geom::{Point, Roi};
use sandshape::learner::{train, MlpModel, TrainConfig};
use sandshape::sandfield::{apply_push, apply_tap, total_mass, MaterialConfig, SandGrid, TapAnchor, ToolFootprint};
use sandshape::servo::{execute_action, ServoConfig};
use sandshape::session::{bench, builtin, replay, Session, BUILTIN_NAMES};
use sandshape::strategies::{
    first_stop, interpolate_near, select_tap, Action, PushStrategy, StopReason, TerminationPolicy,
};
use sandshape::vision::{
    contour_distance, detect_contour, diff_roi, match_contours, mi_error, mutual_information, Contour, GrayImage,
    ResampledImage,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_raw(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap()
}

/// Mutual information straight from the joint probability table.
fn oracle_mi(a: &GrayImage, b: &GrayImage, bins: usize) -> f64 {
    let n = a.pixels().len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    for (&x, &y) in a.pixels().iter().zip(b.pixels()) {
        *joint.entry((x as usize * bins / 256, y as usize * bins / 256)).or_default() += 1.0 / n;
    }
    let mut pa: HashMap<usize, f64> = HashMap::new();
    let mut pb: HashMap<usize, f64> = HashMap::new();
    for (&(i, j), &p) in &joint {
        *pa.entry(i).or_default() += p;
        *pb.entry(j).or_default() += p;
    }
    joint.iter().map(|(&(i, j), &p)| p * (p / (pa[&i] * pb[&j])).ln()).sum()
}

fn mi_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let a = random_image(&mut rng, 8, 8);
        let b = if rng.random_bool(0.2) {
            GrayImage::from_raw(8, 8, a.pixels().iter().map(|p| p / 3).collect()).unwrap()
        } else {
            random_image(&mut rng, 8, 8)
        };
        let bins = [2, 8, 32, 256][rng.random_range(0..4)];
        let mi = mutual_information(&a, &b, bins).unwrap();
        let err = (mi - oracle_mi(&a, &b, bins)).abs();
        worst = worst.max(err);
        ensure(err <= 1e-12, || format!("oracle differs by {err:e}"))?;
        let sym = (mi - mutual_information(&b, &a, bins).unwrap()).abs();
        ensure(sym <= 1e-12, || format!("asymmetry {sym:e}"))?;
        ensure(mi_error(&a, &a, bins).unwrap() == 0.0, || "e(I, I) != 0".into())?;
        let e = mi_error(&a, &b, bins).unwrap();
        ensure((0.0..=1.0).contains(&e), || format!("e = {e} outside [0, 1]"))?;
    }
    Ok(format!("500 pairs, max |MI - oracle| {worst:.1e}"))
}

fn tap_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for i in 0..1000 {
        let tool = ToolFootprint::new(rng.random_range(1..40), rng.random_range(1..40));
        let (w, h) = (rng.random_range(1..12), rng.random_range(1..12));
        // Every fourth pair uses coarse values so ties occur.
        let coarse = i % 4 == 0;
        let cell = |rng: &mut ChaCha8Rng| if coarse { rng.random_range(0..4) as f64 } else { rng.random_range(0.0..255.0) };
        let a = ResampledImage { width: w, height: h, tool, cells: (0..w * h).map(|_| cell(&mut rng)).collect() };
        let b = ResampledImage { width: w, height: h, tool, cells: (0..w * h).map(|_| cell(&mut rng)).collect() };
        let mut best = 0.0;
        let mut ties = Vec::new();
        for row in 0..h {
            for col in 0..w {
                let d = (a.get(col, row) - b.get(col, row)).abs();
                if d > best {
                    best = d;
                    ties.clear();
                }
                if d == best && d > 0.0 {
                    ties.push(Point::new((col * tool.w_tcp) as f64, (row * tool.h_tcp) as f64));
                }
            }
        }
        match select_tap(&a, &b, &mut rng) {
            Ok(Action::Tap { target }) => ensure(ties.contains(&target), || format!("pair {i}: {target:?} not a maximum"))?,
            Ok(other) => return Err(format!("pair {i}: {other:?}")),
            Err(_) => ensure(ties.is_empty(), || format!("pair {i}: refused a non-zero difference"))?,
        }
    }
    let tool = ToolFootprint::new(30, 40);
    let a = ResampledImage { width: 5, height: 5, tool, cells: vec![10.0; 25] };
    let mut b = a.clone();
    b.cells[3 * 5 + 2] = 90.0;
    let got = select_tap(&a, &b, &mut rng).map_err(|e| e.to_string())?;
    ensure(got == Action::Tap { target: Point::new(60.0, 120.0) }, || format!("cell (2,3) gave {got:?}"))?;
    Ok("1000 pairs match exhaustive scan; cell (2,3) at 30x40 -> Tap(60, 120)".into())
}

fn random_grid(rng: &mut ChaCha8Rng) -> SandGrid {
    let (w, h) = (rng.random_range(40..120), rng.random_range(40..120));
    let heights = (0..w * h).map(|_| if rng.random_bool(0.6) { rng.random_range(0.0..12.0) } else { 0.0 }).collect();
    SandGrid::from_heights(w, h, heights).unwrap()
}

fn untouched_outside(before: &SandGrid, after: &SandGrid, region: (i64, i64, i64, i64)) -> bool {
    let (u0, v0, u1, v1) = region;
    (0..before.height()).all(|v| {
        (0..before.width()).all(|u| {
            let inside = (u0..=u1).contains(&(u as i64)) && (v0..=v1).contains(&(v as i64));
            inside || before.get(u, v).to_bits() == after.get(u, v).to_bits()
        })
    })
}

fn mass_conservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let grid = random_grid(&mut rng);
        let tool = ToolFootprint::new(rng.random_range(2..16), rng.random_range(2..16));
        let (w, h) = (grid.width() as f64, grid.height() as f64);
        let pt = |rng: &mut ChaCha8Rng| Point::new(rng.random_range(0.0..w - 1.0), rng.random_range(0.0..h - 1.0));
        let (after, region) = if i % 2 == 0 {
            let (s, e) = (pt(&mut rng), pt(&mut rng));
            let m = (tool.w_tcp + tool.h_tcp + 2) as f64;
            let region = (
                (s.u.min(e.u) - m).floor() as i64,
                (s.v.min(e.v) - m).floor() as i64,
                (s.u.max(e.u) + m).ceil() as i64,
                (s.v.max(e.v) + m).ceil() as i64,
            );
            (apply_push(&grid, s, e, tool).map_err(|e| format!("push {i}: {e}"))?, region)
        } else {
            let t = pt(&mut rng);
            let anchor = if rng.random_bool(0.5) { TapAnchor::Corner } else { TapAnchor::Center };
            let (du, dv) = if anchor == TapAnchor::Center { ((tool.w_tcp / 2) as i64, (tool.h_tcp / 2) as i64) } else { (0, 0) };
            let (u0, v0) = (t.u.floor() as i64 - du, t.v.floor() as i64 - dv);
            let region = (u0 - 1, v0 - 1, u0 + tool.w_tcp as i64, v0 + tool.h_tcp as i64);
            let level = rng.random_range(0.0..6.0);
            (apply_tap(&grid, t, tool, level, anchor).map_err(|e| format!("tap {i}: {e}"))?, region)
        };
        let (m0, m1) = (total_mass(&grid), total_mass(&after));
        let drift = (m1 - m0).abs() / m0;
        worst = worst.max(drift);
        ensure(drift <= 1e-9, || format!("action {i}: drift {drift:e}"))?;
        ensure(untouched_outside(&grid, &after, region), || format!("action {i}: cells changed outside {region:?}"))?;
    }
    Ok(format!("100 pushes + 100 taps, max drift {worst:.1e}, locality holds"))
}

fn interpolation_contraction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let (mut clipped, mut kept) = (0, 0);
    for i in 0..1000 {
        let n = rng.random_range(2..20);
        let c = |rng: &mut ChaCha8Rng, s: f64| {
            Contour::new((0..n).map(|_| Point::new(rng.random_range(0.0..s), rng.random_range(0.0..s))).collect())
        };
        let current = c(&mut rng, 200.0);
        let desired = if i % 3 == 0 { current.translated(Point::new(rng.random_range(-5.0..5.0), 1.0)) } else { c(&mut rng, 200.0) };
        let d = contour_distance(&current, &desired);
        let mu = rng.random_range(0.5..120.0);
        let near = interpolate_near(&current, &desired, mu);
        let dn = contour_distance(&current, &near);
        ensure(dn <= mu, || format!("pair {i}: d(current, near) {dn} > mu {mu}"))?;
        if d <= mu {
            ensure(near == desired, || format!("pair {i}: d <= mu but near != desired"))?;
            kept += 1;
        } else {
            ensure(mu - dn <= 1e-9 * mu.max(1.0), || format!("pair {i}: near short of mu ({dn} vs {mu})"))?;
            clipped += 1;
        }
    }
    Ok(format!("1000 pairs ({clipped} interpolated, {kept} at the goal)"))
}

/// Frames of a block whose lower edge advances 4 rows per frame, with a tool
/// track moving 6 px per frame.
fn ideal_motion() -> (Vec<GrayImage>, Vec<Point>) {
    let (w, h) = (140, 230);
    let mut images = Vec::new();
    let mut tools = Vec::new();
    for i in 0..50 {
        let edge = 12 + 4 * i;
        let mut img = GrayImage::new(w, h, 0);
        for v in 4..edge {
            for u in 30..110 {
                img.set(u, v, 200);
            }
        }
        images.push(img);
        tools.push(Point::new(70.0, 10.0 + 6.0 * i as f64));
    }
    (images, tools)
}

/// All frame pairs of one demo, tested directly against the selection rules.
fn brute_force_pairs(demo: &Demo, cfg: &ExtractConfig) -> Vec<(usize, usize, [f64; 4])> {
    let frames: Vec<_> = demo.frames.iter().filter(|f| f.tool_pos.is_some()).collect();
    let raw: Vec<Point> = frames.iter().map(|f| f.tool_pos.unwrap()).collect();
    let sets = split_motions(&smooth_positions(&raw));
    let set_of = |i: usize| sets.iter().position(|s| s.indices.contains(&i));
    let mut out = Vec::new();
    for a in 0..frames.len() {
        for b in a + 1..frames.len() {
            let (Some(sa), Some(sb)) = (set_of(a), set_of(b)) else { continue };
            if sa != sb || raw[a].dist(raw[b]) <= cfg.tau_u {
                continue;
            }
            let set = &sets[sa];
            let (first, last) = (set.indices[0], *set.indices.last().unwrap());
            let Ok(roi) = diff_roi(&frames[first].image, &frames[last].image, cfg.blob_threshold) else { continue };
            let img = &frames[first].image;
            let roi = roi.expand(cfg.roi_margin, &Roi::full(img.width(), img.height()));
            let detect = |k: usize| detect_contour(&frames[k].image, roi, cfg.n_points, cfg.sand_threshold).ok();
            let (Some(xm), Some(xn)) = (detect(a), detect(b)) else { continue };
            let Ok(matched) = match_contours(&xm, &xn) else { continue };
            if xm.stacked_distance(&matched.contour) > cfg.tau_x {
                out.push((frames[a].index, frames[b].index, [raw[a].u, raw[a].v, raw[b].u, raw[b].v]));
            }
        }
    }
    out
}

fn triplet_combinatorics() -> Check {
    let cfg = ExtractConfig::default();
    let (images, tools) = ideal_motion();
    let refs: Vec<&GrayImage> = images.iter().collect();
    let ids: Vec<usize> = (0..50).collect();
    let set = MotionSet { indices: ids.clone(), velocities: vec![Point::new(0.0, 6.0); 50] };
    let ideal = extract_triplets(0, &refs, &tools, &ids, &set, &cfg).len();
    ensure(ideal == 1225, || format!("ideal 50-frame set gave {ideal} triplets"))?;

    let demos = synthesize_demos(&SynthConfig::default(), 9, 20);
    let mut total = 0;
    for d in &demos {
        let got: Vec<_> = extract_demo(d, &cfg).into_iter().map(|t| (t.m, t.n, t.p)).collect();
        let mut want = brute_force_pairs(d, &cfg);
        let mut got_sorted = got.clone();
        got_sorted.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        want.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        ensure(got_sorted == want, || format!("demo {}: extractor {} vs oracle {} triplets", d.id, got.len(), want.len()))?;
        total += got.len();
    }
    ensure(total > 0, || "scripted demos produced no triplets".into())?;
    Ok(format!("ideal set -> 1225; 20 demos -> {total} triplets, equal to the pair oracle"))
}

fn finite_difference_check() -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut model = MlpModel::new(&[6, 7, 5, 3], 11);
    let inputs: Vec<Vec<f64>> = (0..8).map(|_| (0..6).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
    let targets: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let xs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let ys: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let (_, grads) = model.gradients(&xs, &ys);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, plus: f64, minus: f64| {
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    };
    for l in 0..model.layers().len() {
        for k in 0..model.layers()[l].weights.len() {
            let w0 = model.weights_mut(l)[k];
            model.weights_mut(l)[k] = w0 + h;
            let plus = model.loss(&xs, &ys);
            model.weights_mut(l)[k] = w0 - h;
            let minus = model.loss(&xs, &ys);
            model.weights_mut(l)[k] = w0;
            check(grads.weights[l][k], plus, minus);
        }
        for k in 0..model.layers()[l].biases.len() {
            let b0 = model.biases_mut(l)[k];
            model.biases_mut(l)[k] = b0 + h;
            let plus = model.loss(&xs, &ys);
            model.biases_mut(l)[k] = b0 - h;
            let minus = model.loss(&xs, &ys);
            model.biases_mut(l)[k] = b0;
            check(grads.biases[l][k], plus, minus);
        }
    }
    ensure(worst <= 1e-4, || format!("gradient relative error {worst:e}"))?;
    Ok(worst)
}

/// The policy used by the benchmark: 200 synthetic demonstrations.
fn trained_policy() -> Result<(MlpModel, usize, [f64; 2]), String> {
    let demos = synthesize_demos(&SynthConfig::default(), 42, 200);
    let triplets = extract_all(&demos, &ExtractConfig::default());
    let cfg = TrainConfig { episodes: 25_000, seed: 1, learning_rate: 1e-2, ..TrainConfig::default() };
    let (model, report) = train(&triplets, &cfg).map_err(|e| e.to_string())?;
    Ok((model, triplets.len(), [report.test.mae_u_e, report.test.mae_v_e]))
}

fn learner_sanity(policy: &Result<(MlpModel, usize, [f64; 2]), String>, train_time: Duration) -> Check {
    let worst = finite_difference_check()?;
    let (_, n, [mu, mv]) = policy.as_ref().map_err(Clone::clone)?;
    ensure(*n >= 3000, || format!("only {n} triplets"))?;
    ensure(*mu <= 10.0 && *mv <= 10.0, || format!("end-pixel MAE u {mu:.2} v {mv:.2} px"))?;
    Ok(format!("FD rel err {worst:.1e}; {n} triplets, held-out MAE u_E {mu:.2} v_E {mv:.2} px, trained in {train_time:.1?}"))
}

fn servo_laws() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let cfg = ServoConfig::default();
    let material = MaterialConfig::default();
    let mut steps = 0;
    for i in 0..40 {
        let sc = builtin(BUILTIN_NAMES[i % BUILTIN_NAMES.len()]).unwrap();
        let grid = sc.initial_grid().unwrap();
        let ws = grid.workspace();
        let pt = |rng: &mut ChaCha8Rng| {
            Point::new(rng.random_range(ws.u_min as f64..(ws.u_end() - 1) as f64), rng.random_range(ws.v_min as f64..(ws.v_end() - 1) as f64))
        };
        let action = if i % 3 == 2 {
            Action::Tap { target: pt(&mut rng) }
        } else {
            Action::Push { start: pt(&mut rng), end: pt(&mut rng) }
        };
        let run = execute_action(&action, &grid, sc.tool, &material, &cfg).map_err(|e| format!("plan {i}: {e}"))?;
        let direct = match action {
            Action::Push { start, end } => apply_push(&grid, start, end, sc.tool),
            Action::Tap { target } => apply_tap(&grid, target, sc.tool, material.tap_level, material.tap_anchor),
        }
        .map_err(|e| e.to_string())?;
        ensure(run.grid == direct, || format!("plan {i}: servo grid differs from direct application"))?;
        let home = cfg.home_pixel(&grid);
        let end = run.trajectory.last().unwrap().pixel;
        ensure(end.dist(home) <= 2.0, || format!("plan {i}: tool ends {:.2} px from home", end.dist(home)))?;

        let t = &run.trajectory;
        for w in t.windows(2) {
            let (a, b) = (w[0], w[1]);
            let moved = ((b.state.x - a.state.x).powi(2) + (b.state.y - a.state.y).powi(2)).sqrt();
            let last_of_segment = t.get(b.step + 1).is_none_or(|next| next.segment != b.segment || {
                let dn = ((next.state.x - b.state.x).powi(2) + (next.state.y - b.state.y).powi(2)).sqrt();
                dn == 0.0
            });
            if moved > 0.0 && !last_of_segment {
                let speed = moved / cfg.dt;
                ensure((speed - cfg.v_xy).abs() <= 1e-9, || format!("plan {i} step {}: planar speed {speed}", b.step))?;
                steps += 1;
            }
        }
    }
    Ok(format!("40 plans, {steps} interior steps at constant speed, grids bit-identical, tool home"))
}

fn termination_rules() -> Check {
    let strict = TerminationPolicy::strict(100);
    let relaxed = TerminationPolicy::relaxed(0.005, 100);
    let cases: [(&[f64], Option<usize>, Option<usize>); 5] = [
        (&[0.5, 0.4, 0.3, 0.2], None, None),
        (&[0.5, 0.4, 0.41, 0.3], Some(3), Some(3)),
        (&[0.5, 0.45, 0.453, 0.40, 0.41], Some(3), Some(5)),
        (&[1.0, 0.5, 0.5, 0.25], None, None),
        (&[0.9, 1.0, 1.005, 0.2, 0.2 + 0.0051], Some(2), Some(2)),
    ];
    for (errors, s, r) in cases {
        let got_s = first_stop(errors, &strict).map(|(k, _)| k);
        let got_r = first_stop(errors, &relaxed).map(|(k, _)| k);
        ensure(got_s == s, || format!("strict on {errors:?}: {got_s:?}, expected {s:?}"))?;
        ensure(got_r == r, || format!("relaxed on {errors:?}: {got_r:?}, expected {r:?}"))?;
    }
    // Rises of at most the tolerance never stop the relaxed rule.
    let small = [0.5, 0.504, 0.5, 0.503, 0.499, 0.5039];
    ensure(first_stop(&small, &relaxed).is_none(), || "relaxed stopped on small rises".into())?;
    ensure(first_stop(&small, &strict) == Some((2, StopReason::ErrorIncrease)), || "strict missed the first rise".into())?;
    Ok("hand-built sequences; strict stops at k=3 where relaxed continues to k=5".into())
}

fn letter_scenario_trend(policy: &Result<(MlpModel, usize, [f64; 2]), String>) -> Check {
    let (model, _, _) = policy.as_ref().map_err(Clone::clone)?;
    let model = Arc::new(model.clone());
    let scenarios: Vec<_> = ["c", "e", "sigma"].iter().map(|n| builtin(n).unwrap()).collect();
    let strategies = [PushStrategy::Maximum, PushStrategy::Average, PushStrategy::Learned];
    let report = bench(&scenarios, &strategies, &[7], Some(model)).map_err(|e| e.to_string())?;
    let mut worst = f64::INFINITY;
    for r in &report.runs {
        worst = worst.min(r.reduction());
        ensure(r.reduction() >= 0.30, || {
            format!("{} / {}: reduction {:.1}%", r.scenario, r.strategy.short_name(), 100.0 * r.reduction())
        })?;
    }
    let mut trends = Vec::new();
    for s in strategies {
        let curve = report.mean_curve(s, 15);
        let n = curve.len() as f64;
        let mx = (n - 1.0) / 2.0;
        let my = curve.iter().sum::<f64>() / n;
        let slope = curve.iter().enumerate().map(|(k, y)| (k as f64 - mx) * (y - my)).sum::<f64>()
            / curve.iter().enumerate().map(|(k, _)| (k as f64 - mx).powi(2)).sum::<f64>();
        ensure(slope < 0.0 && curve[14] < curve[0], || format!("{} mean curve not decreasing (slope {slope:e})", s.short_name()))?;
        trends.push(format!("{} {:.3}->{:.3}", s.short_name(), curve[0], curve[14]));
    }
    Ok(format!("9 runs, min reduction {:.1}%; mean e over 15 iterations: {}", 100.0 * worst, trends.join(", ")))
}

fn determinism(policy: &Result<(MlpModel, usize, [f64; 2]), String>) -> Check {
    let model = policy.as_ref().ok().map(|(m, _, _)| Arc::new(m.clone()));
    let mut runs = 0;
    for name in BUILTIN_NAMES {
        for strategy in [PushStrategy::Maximum, PushStrategy::Learned] {
            if strategy == PushStrategy::Learned && model.is_none() {
                continue;
            }
            let run = || -> Result<String, String> {
                let mut s = Session::new(builtin(name).unwrap(), model.clone()).map_err(|e| e.to_string())?.with_auto_strategy(strategy);
                Ok(s.run_autonomous().map_err(|e| e.to_string())?.to_jsonl())
            };
            let (a, b) = (run()?, run()?);
            ensure(a == b, || format!("{name}/{}: logs differ", strategy.short_name()))?;
            let log = sandshape::session::SessionLog::read(a.as_bytes()).map_err(|e| e.to_string())?;
            let v = replay(&log, model.clone()).map_err(|e| e.to_string())?;
            ensure(v.matched, || format!("{name}/{}: replay mismatch {:?}", strategy.short_name(), v.mismatches))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} scenario runs bit-identical and replayed"))
}

fn report(name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) -> bool {
    let t = Instant::now();
    let mut result = f();
    let dt = t.elapsed();
    if let (Ok(_), Some(limit)) = (&result, limit) {
        if dt > limit {
            result = Err(format!("took {dt:.1?}, limit {limit:?}"));
        }
    }
    let ok = result.is_ok();
    let detail = result.unwrap_or_else(|e| e);
    println!("{} {name:<26} {:>8.2?}  {detail}", if ok { "PASS" } else { "FAIL" }, dt);
    ok
}

fn main() {
    let secs = Duration::from_secs;
    let mut all = true;
    all &= report("mi_correctness", Some(secs(5)), mi_correctness);
    all &= report("tap_oracle", Some(secs(5)), tap_oracle);
    all &= report("mass_conservation", Some(secs(10)), mass_conservation);
    all &= report("interpolation_contraction", None, interpolation_contraction);
    all &= report("triplet_combinatorics", Some(secs(30)), triplet_combinatorics);
    let t = Instant::now();
    let policy = trained_policy();
    let train_time = t.elapsed();
    all &= report("learner_sanity", Some(secs(600).saturating_sub(train_time)), || learner_sanity(&policy, train_time));
    all &= report("servo_laws", None, servo_laws);
    all &= report("termination_rules", None, termination_rules);
    all &= report("letter_scenario_trend", Some(secs(120)), || letter_scenario_trend(&policy));
    all &= report("determinism_replay", None, || determinism(&policy));
    if !all {
        std::process::exit(1);
    }
}
