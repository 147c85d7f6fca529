//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};

use uav_height::agent::PolicyKind;
use uav_height::episode::{Action, EnvState, Environment, EpisodeConfig, StateVariant};
use uav_height::harness::{self, CellResult, CellSpec, ExperimentConfig};
use uav_height::neural;
use uav_height::radio::{self, RadioParams};
use uav_height::seed::SimRng;
use uav_height::topology::{BuildingGrid, CityTopology, Point3, TopologyParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn city(bs: f64, build: f64, seed: u64) -> CityTopology {
    let p = TopologyParams { bs_density_km2: bs, build_density_km2: build, ..Default::default() };
    CityTopology::generate(&p, seed).unwrap()
}

/// Every building grown (or shrunk) by `d` in half-width and height.
fn inflate(t: &CityTopology, d: f64) -> CityTopology {
    let g = &t.buildings;
    let heights = g.heights_m().iter().map(|h| (h + d).max(0.0)).collect();
    let grid = BuildingGrid::new(g.pitch_m(), g.footprint_side_m() + 2.0 * d, heights).unwrap();
    CityTopology { buildings: grid, ..t.clone() }
}

fn blockage_oracle() -> Outcome {
    const MARGIN: f64 = 0.2;
    const PER_DENSITY: usize = 3334;
    let mut rng = SimRng::seed_from_u64(101);
    let (mut agree, mut total, mut excluded, mut blocked) = (0usize, 0usize, 0usize, 0usize);
    let mut first_miss = None;
    for (k, build) in [100.0, 500.0, 1000.0].into_iter().enumerate() {
        let topo = city(5.0, build, 7 + k as u64);
        let (grown, shrunk) = (inflate(&topo, MARGIN), inflate(&topo, -MARGIN));
        let mut kept = 0;
        while kept < PER_DENSITY {
            let uav = Point3::new(
                rng.random_range(-1000.0..1000.0),
                rng.random_range(-1000.0..1000.0),
                rng.random_range(20.0..200.0),
            );
            let bs = &topo.bss[rng.random_range(0..topo.bss.len())];
            // blockage is monotone in building size, so any decision that
            // flips within the margin is a clearance case
            if radio::is_blocked(&grown, uav, bs) != radio::is_blocked(&shrunk, uav, bs) {
                excluded += 1;
                continue;
            }
            kept += 1;
            total += 1;
            let analytic = radio::is_blocked(&topo, uav, bs);
            let sampled = radio::is_blocked_oracle(&topo, uav, bs, 0.1);
            blocked += analytic as usize;
            if analytic == sampled {
                agree += 1;
            } else if first_miss.is_none() {
                first_miss = Some(format!("{uav:?} -> {bs:?} analytic={analytic}"));
            }
        }
    }
    let mut detail = format!("{agree}/{total} links agree ({blocked} blocked, {excluded} margin cases excluded)");
    if let Some(m) = first_miss {
        detail += &format!("; first disagreement {m}");
    }
    outcome(agree == total && total >= 10_000, detail)
}

fn gradient_check() -> Outcome {
    let t0 = Instant::now();
    let errs = neural::self_test(&[5, 64, 64, 3], 10, 8, 2024).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= 1e-4 && secs < 10.0,
        format!("{} instances, worst relative error {worst:.2e}, {secs:.1} s", errs.len()),
    )
}

fn genie_direction() -> Outcome {
    let radio_p = RadioParams::default();
    let ep = EpisodeConfig::default();
    let mut rng = SimRng::seed_from_u64(303);
    let cities: Vec<CityTopology> = (0..10)
        .map(|k| city([1.0, 5.0, 10.0][k % 3], [100.0, 500.0, 1000.0][k % 3], 50 + k as u64))
        .collect();
    let mut matches = 0;
    let poses = 1000;
    for i in 0..poses {
        let topo = &cities[i % cities.len()];
        let step_idx = rng.random_range(0..ep.steps_per_episode);
        let h = rng.random_range(20..=200) as f64;
        // brute force over the 1 m grid, recomputed from the radio model
        let x = ep.x_at(step_idx + 1);
        let serving = radio::nearest_bs(topo, x, 0.0).unwrap();
        let s = |hh: f64| radio::sinr(topo, Point3::new(x, 0.0, hh), serving, &radio_p).unwrap();
        let here = s(h);
        let (mut best_h, mut best) = (h, here);
        for hh in 20..=200 {
            let v = s(hh as f64);
            if v > best {
                best = v;
                best_h = hh as f64;
            }
        }
        let want = match (best_h - h).partial_cmp(&0.0).unwrap() {
            std::cmp::Ordering::Greater => Action::Up,
            std::cmp::Ordering::Less => Action::Down,
            std::cmp::Ordering::Equal => Action::Stay,
        };
        let mut env = Environment::new(topo, &radio_p, &ep).unwrap();
        let (serving_idx, s_now) = env.link_at(ep.x_at(step_idx), h);
        let state = EnvState { step_idx, x_m: ep.x_at(step_idx), h_m: h, serving_idx, sinr_db: radio::to_db(s_now) };
        if env.genie_action(&state) == want {
            matches += 1;
        }
    }
    outcome(matches == poses, format!("{matches}/{poses} poses"))
}

fn sweep_cli(dir: &Path, jobs: &str) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_uav-height"))
        .args(["sweep", "--seed", "17", "--episodes", "10", "--replicates", "2", "--jobs", jobs, "--out"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&o.stderr).trim().to_string())
    }
}

fn determinism(root: &Path) -> Outcome {
    let (a, b) = (root.join("jobs1"), root.join("jobs4"));
    if let Err(e) = sweep_cli(&a, "1").and_then(|_| sweep_cli(&b, "4")) {
        return outcome(false, format!("sweep failed: {e}"));
    }
    let files = ["episodes.csv", "steps.csv", "summary.csv"];
    let differing: Vec<&str> = files
        .into_iter()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .collect();
    let rows = std::fs::read_to_string(a.join("episodes.csv")).unwrap().lines().count() - 1;
    outcome(
        differing.is_empty(),
        format!("full grid, 2 replicates, 10 episodes, {rows} episode rows; differing files: {differing:?}"),
    )
}

fn replay_consistency(root: &Path) -> Outcome {
    match harness::replay_check(&root.join("jobs1")) {
        Ok(r) => outcome(
            r.rows_checked > 0 && r.max_abs_error <= 1e-9,
            format!("{} step rows, {} episodes, max abs error {:.1e}", r.rows_checked, r.episodes_checked, r.max_abs_error),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

/// The sweep behind the learning and ordering criteria: every baseline at
/// every density point plus DQN Basic at (5, 500) and (5, 100), 5 replicates.
fn trend_sweep() -> (Vec<CellResult>, f64) {
    let cfg = ExperimentConfig { variants: vec![StateVariant::Basic], ..Default::default() };
    let cells: Vec<CellSpec> = cfg
        .cells()
        .into_iter()
        .filter(|c| c.policy != PolicyKind::Dqn || (c.bs_density_km2 == 5.0 && c.build_density_km2 != 1000.0))
        .collect();
    let t0 = Instant::now();
    let report = harness::sweep(&cfg, &cells, 1).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    (report.results, t0.elapsed().as_secs_f64())
}

type Key = (u64, u64, PolicyKind, usize);

fn index(results: &[CellResult]) -> HashMap<Key, &CellResult> {
    results
        .iter()
        .map(|r| ((r.spec.bs_density_km2.to_bits(), r.spec.build_density_km2.to_bits(), r.spec.policy, r.spec.replicate), r))
        .collect()
}

fn get<'a>(idx: &HashMap<Key, &'a CellResult>, bs: f64, build: f64, p: PolicyKind, rep: usize) -> &'a CellResult {
    idx[&(bs.to_bits(), build.to_bits(), p, rep)]
}

fn learning_trend(results: &[CellResult], secs_per_cell: f64) -> Outcome {
    let idx = index(results);
    let ratios: Vec<f64> = (0..5)
        .map(|rep| {
            let r = get(&idx, 5.0, 500.0, PolicyKind::Dqn, rep);
            r.mean_throughput(250, 300) / r.mean_throughput(1, 50)
        })
        .collect();
    let hits = ratios.iter().filter(|q| **q >= 1.10).count();
    let shown: Vec<String> = ratios.iter().map(|q| format!("{q:.3}")).collect();
    outcome(
        hits >= 4,
        format!("late/early ratio per seed [{}], {hits}/5 at >= 1.10, {secs_per_cell:.1} s per DQN cell", shown.join(", ")),
    )
}

fn baseline_ordering(results: &[CellResult]) -> Outcome {
    let idx = index(results);
    let cfg = ExperimentConfig::default();
    let (mut ok, mut n) = (0, 0);
    let mut worst = f64::INFINITY;
    let mut bad = Vec::new();
    for rep in 0..5 {
        for (bs, build) in cfg.density_points() {
            let m = |p| get(&idx, bs, build, p, rep).mean_throughput(1, 300);
            let (g, c, r) = (m(PolicyKind::Genie), m(PolicyKind::Constant), m(PolicyKind::Random));
            n += 1;
            worst = worst.min(g - c.max(r));
            if g >= c && g >= r {
                ok += 1;
            } else {
                bad.push(format!("({bs},{build}) r{rep}"));
            }
        }
    }
    outcome(ok == n, format!("{ok}/{n} cells, smallest genie margin {worst:.2} bits/Hz; failing {bad:?}"))
}

fn rl_vs_constant(results: &[CellResult]) -> Outcome {
    let idx = index(results);
    let mut parts = Vec::new();
    let mut pass = true;
    for build in [500.0, 100.0] {
        let gains: Vec<f64> = (0..5)
            .map(|rep| {
                let d = get(&idx, 5.0, build, PolicyKind::Dqn, rep).mean_throughput(250, 300);
                let c = get(&idx, 5.0, build, PolicyKind::Constant, rep).mean_throughput(250, 300);
                d / c - 1.0
            })
            .collect();
        let hits = gains.iter().filter(|g| **g >= 0.15).count();
        pass &= hits >= 4;
        let shown: Vec<String> = gains.iter().map(|g| format!("{:+.0}%", 100.0 * g)).collect();
        parts.push(format!("build {build}: [{}] {hits}/5", shown.join(", ")));
    }
    outcome(pass, parts.join("; "))
}

fn constant_building_direction(results: &[CellResult]) -> Outcome {
    let idx = index(results);
    let pairs: Vec<(f64, f64)> = (0..5)
        .map(|rep| {
            let m = |b| get(&idx, 5.0, b, PolicyKind::Constant, rep).mean_throughput(1, 300);
            (m(500.0), m(100.0))
        })
        .collect();
    let wins = pairs.iter().filter(|(hi, lo)| hi > lo).count();
    let shown: Vec<String> = pairs.iter().map(|(a, b)| format!("{a:.1} vs {b:.1}")).collect();
    outcome(wins >= 3, format!("build 500 vs 100 per seed [{}], {wins}/5", shown.join(", ")))
}

fn statistical_sanity() -> Outcome {
    let n_topo = 10_000;
    let params = TopologyParams { bs_density_km2: 5.0, build_density_km2: 100.0, ..Default::default() };
    let expected = params.bs_density_km2 * (params.area_side_m / 1000.0).powi(2);
    let mut count = 0usize;
    let mut heights = Vec::new();
    for seed in 0..n_topo {
        let t = CityTopology::generate(&params, seed).unwrap();
        count += t.bss.len();
        if seed < 4 {
            heights.extend_from_slice(t.buildings.heights_m());
        }
    }
    let mean_count = count as f64 / n_topo as f64;
    let rel = (mean_count / expected - 1.0).abs();

    heights.sort_by(f64::total_cmp);
    let n = heights.len() as f64;
    let scale: f64 = params.height_scale_m;
    let d = heights
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let f = 1.0 - (-h * h / (2.0 * scale * scale)).exp();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let critical = 1.628 / n.sqrt();
    outcome(
        rel < 0.01 && d < critical,
        format!(
            "mean BS count {mean_count:.3} vs {expected} ({:.3}% off) over {n_topo} cities; KS D = {d:.5} < {critical:.5} on {} heights",
            100.0 * rel,
            heights.len()
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        let secs = t0.elapsed().as_secs_f64();
        println!("{} {id:>2} {name}: {} ({secs:.1} s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, secs));
    };

    record(1, "blockage oracle equivalence", &mut blockage_oracle);
    record(2, "gradient check", &mut gradient_check);
    record(3, "genie direction", &mut genie_direction);
    record(4, "sweep determinism across job counts", &mut || determinism(tmp.path()));

    let (sweep, secs) = trend_sweep();
    let dqn_cells = sweep.iter().filter(|r| r.spec.policy == PolicyKind::Dqn).count();
    let per_cell = secs / dqn_cells.max(1) as f64;
    record(5, "learning trend", &mut || learning_trend(&sweep, per_cell));
    record(6, "baseline ordering", &mut || baseline_ordering(&sweep));
    record(7, "rl beats constant", &mut || rl_vs_constant(&sweep));
    record(8, "constant building-density direction", &mut || constant_building_direction(&sweep));
    record(9, "replay self-consistency", &mut || replay_consistency(tmp.path()));
    record(10, "statistical sanity", &mut statistical_sanity);

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
