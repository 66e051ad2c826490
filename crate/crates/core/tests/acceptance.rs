//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Reference skin factors below are `delta_t^(1/N)` evaluated at 40
//! significant digits and frozen here.

use std::path::Path;
use std::process::Command;

use nhse_circuit::analytic::{solve_analytic, LatticeSpec};
use nhse_circuit::eigen::{eig, eigvals, Normalization, SolverConfig};
use nhse_circuit::laplacian::{assemble, assemble_shifted, FrequencySpec};
use nhse_circuit::measurement::{
    fit_uniform_correction, measure, DriveConfig, DriveMode, NoiseModel,
};
use nhse_circuit::metrics::{fit_skin_factor, ipr, scan, ChainTemplate};
use nhse_circuit::netlist::{build_chain, ChainParams};
use nhse_circuit::{CMatrix, C64};

const C0: f64 = 10e-9;
const C1: f64 = 220e-9;
const L: f64 = 220e-6;
const OMEGA_C1: f64 = 0.1382300767579509;

/// (delta_t, N, |z|) with delta_t taken as the decimal literal.
const Z_LITERAL: [(f64, usize, f64); 16] = [
    (0.0454545, 6, 0.5973966929861502),
    (0.0454545, 10, 0.7341041656839397),
    (0.0454545, 18, 0.8422110555954095),
    (0.0454545, 24, 0.8791555124357474),
    (0.136364, 6, 0.7174362039397368),
    (0.136364, 10, 0.8193509719030542),
    (0.136364, 18, 0.8952158500388888),
    (0.136364, 24, 0.9203347536869764),
    (0.454545, 6, 0.8768584284449175),
    (0.454545, 10, 0.9241823890834673),
    (0.454545, 18, 0.9571422641125505),
    (0.454545, 24, 0.9676813481622766),
    (1.0, 6, 1.0),
    (1.0, 10, 1.0),
    (1.0, 18, 1.0),
    (1.0, 24, 1.0),
];

/// Reference rows (C2, C3) and |z| for N = 10 with delta_t = C2/C1 exactly.
const REFERENCE_ROWS: [(f64, f64, f64); 4] = [
    (10e-9, 220e-9, 0.7341042390943966),
    (30e-9, 200e-9, 0.8193507534097821),
    (100e-9, 130e-9, 0.924182481501757),
    (220e-9, 10e-9, 1.0),
];

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        println!(
            "{} criterion {id}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            self.failed += 1;
        }
    }
}

fn f100k() -> FrequencySpec {
    FrequencySpec::from_hz(100e3).unwrap()
}

fn template() -> ChainTemplate {
    ChainTemplate {
        c0: C0,
        c1: C1,
        l: L,
    }
}

/// Largest distance after greedy nearest pairing, relative to the scale of `b`.
fn multiset_rel(a: &[C64], b: &[C64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d / scale);
    }
    worst
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if !n.is_multiple_of(2) {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] > w[1])
}

/// Every eigenvector's fitted skin factor and the mean IPR.
fn mode_metrics(jt: &CMatrix) -> (Vec<f64>, f64, Vec<C64>) {
    let s = eig(jt, &SolverConfig::default()).unwrap();
    let zs = (0..s.len())
        .map(|k| fit_skin_factor(&s.eigenvector(k)).unwrap().z)
        .collect();
    let ipr_mean = (0..s.len())
        .map(|k| ipr(&s.eigenvector(k)).unwrap())
        .sum::<f64>()
        / s.len() as f64;
    (zs, ipr_mean, s.eigenvalues)
}

fn criterion_1(r: &mut Report) {
    let f = f100k();
    let (mut worst_eig, mut worst_z, mut worst_radius): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &(delta_t, n, z_ref) in &Z_LITERAL {
        let p = template().chain(n, delta_t).unwrap();
        let jt = assemble_shifted(&build_chain(&p).unwrap(), &f)
            .unwrap()
            .entries;
        let spec = LatticeSpec::real(n, C1, delta_t).unwrap();
        let expected: Vec<C64> = solve_analytic(&spec)
            .unwrap()
            .iter()
            .map(|m| C64::new(0.0, -f.omega) * m.energy)
            .collect();
        let (zs, _, values) = mode_metrics(&jt);
        worst_eig = worst_eig.max(multiset_rel(&values, &expected));
        for z in zs {
            worst_z = worst_z.max((z - z_ref).abs());
        }
        let radius = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        worst_radius = worst_radius.max((radius - OMEGA_C1 * z_ref).abs() / (OMEGA_C1 * z_ref));
    }
    r.line(
        "1",
        worst_eig <= 1e-9 && worst_z <= 1e-6 && worst_radius <= 1e-9,
        format!(
            "16 (N, delta_t) points: eigenvalue rel err {worst_eig:.2e} (<= 1e-9), skin factor err {worst_z:.2e} (<= 1e-6), spectral radius rel err {worst_radius:.2e} (<= 1e-9)"
        ),
    );
}

fn criterion_2(r: &mut Report) {
    let f = f100k();
    let mut z_means = Vec::new();
    let mut iprs = Vec::new();
    let mut worst_z: f64 = 0.0;
    for &(c2, c3, z_ref) in &REFERENCE_ROWS {
        let p = ChainParams {
            n: 10,
            c0: C0,
            c1: C1,
            c2,
            c3,
            l: L,
        };
        let jt = assemble_shifted(&build_chain(&p).unwrap(), &f)
            .unwrap()
            .entries;
        let (zs, ipr_mean, _) = mode_metrics(&jt);
        for z in &zs {
            worst_z = worst_z.max((z - z_ref).abs());
        }
        z_means.push(zs.iter().sum::<f64>() / zs.len() as f64);
        iprs.push(ipr_mean);
    }
    let ok = worst_z <= 1e-6 && strictly_increasing(&z_means) && strictly_decreasing(&iprs);
    r.line(
        "2",
        ok,
        format!(
            "N=10 reference rows: |z| = {:?} (err {worst_z:.2e} <= 1e-6, increasing), mean IPR = {:?} (decreasing)",
            z_means.iter().map(|z| format!("{z:.6}")).collect::<Vec<_>>(),
            iprs.iter().map(|z| format!("{z:.4}")).collect::<Vec<_>>()
        ),
    );
}

fn criterion_3(r: &mut Report) {
    let deltas = [0.0454545, 0.136364];
    let ns = [6, 10, 18];
    let table = scan(
        &ns,
        &deltas,
        &template(),
        &f100k(),
        &SolverConfig::default(),
    );
    let mut ok = table.failures.is_empty() && table.rows.len() == 6;
    let mut worst: f64 = 0.0;
    for &d in &deltas {
        let rows: Vec<_> = ns.iter().map(|&n| table.get(n, d).unwrap()).collect();
        for row in &rows {
            let z_ref = Z_LITERAL
                .iter()
                .find(|e| e.0 == d && e.1 == row.n)
                .unwrap()
                .2;
            worst = worst
                .max((row.z_fitted - z_ref).abs())
                .max((row.z_analytic - z_ref).abs());
        }
        let zs: Vec<f64> = rows.iter().map(|r| r.z_fitted).collect();
        let iprs: Vec<f64> = rows.iter().map(|r| r.ipr_mean).collect();
        ok &= strictly_increasing(&zs) && strictly_decreasing(&iprs);
    }
    ok &= worst <= 1e-6;
    r.line(
        "3",
        ok,
        format!("N in {{6,10,18}} x delta_t in {{0.0454545,0.136364}}: skin factor err {worst:.2e} (<= 1e-6), z increasing and IPR decreasing in N"),
    );
}

fn criterion_4(r: &mut Report) {
    let f = f100k();
    let n = 10;
    let p = template().chain(n, 0.0).unwrap();
    let jt = assemble_shifted(&build_chain(&p).unwrap(), &f)
        .unwrap()
        .entries;
    let h = jt.scale(C64::new(1.0, 0.0) / C64::new(0.0, -f.omega));
    let mut power = h.clone();
    for _ in 1..n {
        power = &power * &h;
    }
    let nilpotent = power.as_slice().iter().all(|z| *z == C64::new(0.0, 0.0));

    let cfg = SolverConfig::default().with_normalization(Normalization::MaxAbs);
    let s = eig(&jt, &cfg).unwrap();
    let bound = 10.0 * f64::EPSILON.powf(1.0 / n as f64) * jt.norm_1();
    let radius = s.spectral_radius();
    let mut vec_err: f64 = 0.0;
    for k in 0..s.len() {
        let v = s.eigenvector(k);
        let e = v
            .iter()
            .enumerate()
            .map(|(i, z)| {
                (z - if i == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                })
                .norm()
            })
            .fold(0.0, f64::max);
        vec_err = vec_err.max(e);
    }
    r.line(
        "4",
        nilpotent && radius <= bound && vec_err <= 1e-6,
        format!(
            "delta_t=0, N=10: (J~/(-i omega))^N exactly zero: {nilpotent}; max |lambda| {radius:.2e} <= {bound:.2e}; eigenvector err vs (1,0,...,0) {vec_err:.2e} (<= 1e-6)"
        ),
    );
}

fn criterion_5(r: &mut Report) {
    let f = f100k();
    let cfg = SolverConfig::default();
    let mut gj: f64 = 0.0;
    let mut spec: f64 = 0.0;
    let mut drives: f64 = 0.0;
    for &(c2, c3, _) in &REFERENCE_ROWS {
        let net = build_chain(&ChainParams {
            n: 10,
            c0: C0,
            c1: C1,
            c2,
            c3,
            l: L,
        })
        .unwrap();
        let ideal = measure(&net, &f, &DriveConfig::default(), &NoiseModel::default()).unwrap();
        let j = assemble(&ideal.realized_netlist, &f).entries;
        gj = gj.max((&(&ideal.g * &j) - &CMatrix::identity(10)).norm_max());
        let direct = eigvals(&assemble_shifted(&net, &f).unwrap().entries, &cfg).unwrap();
        let recovered = eigvals(ideal.jtilde_recovered.as_ref().unwrap(), &cfg).unwrap();
        spec = spec.max(multiset_rel(&recovered, &direct));
        let series = DriveConfig {
            mode: DriveMode::SeriesResistor,
            amplitude: 1.0,
            series_resistance: 2000.0,
        };
        let series = measure(&net, &f, &series, &NoiseModel::default()).unwrap();
        drives = drives.max((&ideal.g - &series.g).norm_max() / ideal.g.norm_max());
    }
    r.line(
        "5",
        gj <= 1e-10 * 10.0 && spec <= 1e-9 && drives <= 1e-9,
        format!("||GJ - I||_max {gj:.2e} (<= 1e-9), recovered spectrum rel err {spec:.2e} (<= 1e-9), ideal vs 2 kOhm series drive {drives:.2e} (<= 1e-9)"),
    );
}

fn fit_errors(p: &ChainParams, snr_db: Option<f64>, seed: u64) -> (f64, f64) {
    let (lambda_l, lambda_c) = (0.0054, -0.015);
    let f = f100k();
    let noise = NoiseModel {
        cap_bias: lambda_c,
        ind_bias: lambda_l,
        voltage_snr_db: snr_db,
        seed,
        ..NoiseModel::default()
    };
    let run = measure(
        &build_chain(p).unwrap(),
        &f,
        &DriveConfig::default(),
        &noise,
    )
    .unwrap();
    let measured = eigvals(
        run.jtilde_recovered.as_ref().unwrap(),
        &SolverConfig::default(),
    )
    .unwrap();
    let fit = fit_uniform_correction(&measured, p, &f, 0.02).unwrap();
    (
        (fit.lambda_l - lambda_l).abs(),
        (fit.lambda_c - lambda_c).abs(),
    )
}

fn criterion_6(r: &mut Report) {
    let p = ChainParams {
        n: 10,
        c0: C0,
        c1: C1,
        c2: 10e-9,
        c3: 220e-9,
        l: L,
    };
    let (el, ec) = fit_errors(&p, None, 0);
    r.line(
        "6a",
        el <= 2e-4 && ec <= 2e-4,
        format!("noiseless fit of (lambda_L, lambda_C) = (+0.0054, -0.015): errors ({el:.2e}, {ec:.2e}) (<= 2e-4)"),
    );

    let errs: Vec<(f64, f64)> = (0..100)
        .map(|seed| fit_errors(&p, Some(60.0), seed))
        .collect();
    let ml = median(errs.iter().map(|e| e.0).collect());
    let mc = median(errs.iter().map(|e| e.1).collect());
    r.line(
        "6b",
        ml <= 2e-3 && mc <= 2e-3,
        format!(
            "60 dB SNR, 100 seeds: median errors lambda_L {ml:.2e}, lambda_C {mc:.2e} (<= 2e-3)"
        ),
    );
}

fn criterion_7(r: &mut Report) {
    let f = f100k();
    let net = build_chain(&ChainParams {
        n: 10,
        c0: C0,
        c1: C1,
        c2: 10e-9,
        c3: 220e-9,
        l: L,
    })
    .unwrap();
    let mut normalized = Vec::new();
    for snr in [40.0, 60.0, 80.0] {
        let runs: Vec<CMatrix> = (0..100)
            .map(|seed| {
                let noise = NoiseModel {
                    voltage_snr_db: Some(snr),
                    seed,
                    ..NoiseModel::default()
                };
                measure(&net, &f, &DriveConfig::default(), &noise)
                    .unwrap()
                    .g
            })
            .collect();
        // mean over entries of the per-entry sample standard deviation
        let count = runs.len() as f64;
        let mut total = 0.0;
        for i in 0..10 {
            for k in 0..10 {
                let mean = runs.iter().map(|g| g[(i, k)]).sum::<C64>() / count;
                let var = runs
                    .iter()
                    .map(|g| (g[(i, k)] - mean).norm_sqr())
                    .sum::<f64>()
                    / (count - 1.0);
                total += var.sqrt();
            }
        }
        let std = total / 100.0;
        normalized.push(std / 10f64.powf(-snr / 20.0));
    }
    let lo = normalized.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = normalized.iter().copied().fold(0.0, f64::max);
    r.line(
        "7",
        hi / lo <= 2.0,
        format!(
            "std(G) / 10^(-snr/20) at 40/60/80 dB = {normalized:.4?}; spread {:.3} (<= 2)",
            hi / lo
        ),
    );
}

fn nhse(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_nhse"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    match (std::fs::read(a), std::fs::read(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn criterion_8(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name).display().to_string();
    let chain = "10,10e-9,220e-9,10e-9,220e-9,220e-6";
    let mut checked = Vec::new();
    let mut ok = true;

    let single: [(&str, Vec<&str>); 4] = [
        (
            "spectrum.csv",
            vec!["spectrum", "--chain", chain, "--shifted"],
        ),
        ("states.csv", vec!["states", "--chain", chain, "--shifted"]),
        (
            "scan.csv",
            vec![
                "scan",
                "--n-list",
                "6,10",
                "--delta-list",
                "0.0454545,0.136364",
            ],
        ),
        (
            "fit.json",
            vec!["calibrate", "--measured", "", "--chain", chain],
        ),
    ];
    // calibrate reads the G matrix written by measure
    let measure_dir = p("measured");
    let measure_args = [
        "measure",
        "--chain",
        chain,
        "--snr-db",
        "60",
        "--cap-bias",
        "-0.015",
        "--ind-bias",
        "0.0054",
        "--seed",
        "7",
        "--out",
    ];
    let mut args: Vec<&str> = measure_args.to_vec();
    args.push(&measure_dir);
    ok &= nhse(&args);
    let replay_dir = p("measured-replay");
    ok &= nhse(&[
        "replay",
        "--manifest",
        &format!("{measure_dir}/manifest.json"),
        "--out",
        &replay_dir,
    ]);
    for f in ["G.csv", "G.json", "spectrum.csv"] {
        let same = same_bytes(
            &Path::new(&measure_dir).join(f),
            &Path::new(&replay_dir).join(f),
        );
        ok &= same;
        checked.push(format!("measure/{f}"));
    }

    let g_path = format!("{measure_dir}/G.csv");
    for (name, mut args) in single {
        if name == "fit.json" {
            args[2] = &g_path;
        }
        let out = p(name);
        let mut full = args.clone();
        full.extend(["--out", &out]);
        ok &= nhse(&full);
        let again = p(&format!("replay-{name}"));
        ok &= nhse(&[
            "replay",
            "--manifest",
            &format!("{out}.manifest.json"),
            "--out",
            &again,
        ]);
        ok &= same_bytes(Path::new(&out), Path::new(&again));
        checked.push(name.to_string());
    }
    r.line(
        "8",
        ok,
        format!("manifest replay byte-identical for {}", checked.join(", ")),
    );
}

fn main() {
    let mut r = Report { failed: 0 };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    if r.failed > 0 {
        println!("{} acceptance criteria failed", r.failed);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
