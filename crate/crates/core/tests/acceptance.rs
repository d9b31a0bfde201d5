//! Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_rational::Ratio;
use rand::Rng;
use soficdim::banach::{random_unitary, Exponent, C64};
use soficdim::cayley::{
    boundary_exact, coboundary, harmonic_generator, harmonic_generator_exact, harmonic_norm_limit,
    harmonic_norm_partial_sum, hodge_decompose, spectral_gap_estimate, EdgeFunction, TruncatedCayleyGraph,
};
use soficdim::epsdim::eps_dim_bracket;
use soficdim::group::{GroupDescriptor, GroupWord};
use soficdim::lab::config::ExperimentConfig;
use soficdim::lab::pipeline::run;
use soficdim::sofic::{folner_cyclic, seeded_rng};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn config(s: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(s).expect("acceptance config")
}

fn z(n: i64) -> GroupWord {
    GroupWord::abelian(GroupDescriptor::Integers, vec![n]).unwrap()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let sigma = folner_cyclic(10_000).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(101);
    let mut worst_mult = 0.0f64;
    for _ in 0..50 {
        let (s, u) = (rng.gen_range(-1_000_000..1_000_000), rng.gen_range(-1_000_000..1_000_000));
        worst_mult = worst_mult.max(sigma.multiplicativity_defect(&z(s), &z(u)).unwrap());
    }
    let mut least_free = 1.0f64;
    for _ in 0..50 {
        let s = rng.gen_range(-1_000_000..1_000_000);
        let mut off = 0;
        while off == 0 {
            off = rng.gen_range(-9_999..10_000);
        }
        least_free = least_free.min(sigma.freeness_defect(&z(s), &z(s + off)).unwrap());
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(worst_mult == 0.0, format!("multiplicativity defect {worst_mult}"))?;
    ensure(least_free == 1.0, format!("freeness defect {least_free}"))?;
    ensure(secs < 1.0, format!("runtime {secs:.3}s"))?;
    Ok(format!("multiplicativity 0, freeness 1 on 50+50 pairs in {secs:.3}s"))
}

fn criterion_2() -> Outcome {
    let u = random_unitary(100, &mut seeded_rng(202));
    let a: Vec<Vec<C64>> = (0..50).map(|c| u.column(c).iter().copied().collect()).collect();
    let b = eps_dim_bracket(&a, 0.1, Exponent::TWO).map_err(|e| e.to_string())?;
    ensure((b.lower, b.upper) == (50, 50), format!("orthonormal bracket [{}, {}]", b.lower, b.upper))?;
    let mut exact = 0;
    for seed in 0..100 {
        let (fam, eps) = common::random_instance(10_000 + seed);
        let oracle = common::brute_force_eps_dim(&fam, eps);
        let b = eps_dim_bracket(&fam, eps, Exponent::TWO).map_err(|e| e.to_string())?;
        ensure(
            b.lower <= oracle && oracle <= b.upper,
            format!("instance {seed}: oracle {oracle} outside [{}, {}]", b.lower, b.upper),
        )?;
        if b.lower == b.upper {
            exact += 1;
        }
    }
    Ok(format!("orthonormal [50, 50]; 100/100 oracle instances inside, {exact} settled exactly"))
}

const LP_FREE2: &str = r#"
id = "acceptance-lp"
seed = 20240611
[group]
kind = "free"
rank = 2
[action]
kind = "regular-lp"
multiplicity = 1
[approximation]
kind = "random"
levels = [100, 200, 400]
[hom]
p = 2.0
f_radius = 1
m = 1
delta = 0.1
epsilons = [0.1]
"#;

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let r = run(&config(LP_FREE2)).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let l = r.largest_level();
    ensure(l.degree == 400, "largest level is not 400")?;
    let pass = l.rungs.iter().map(|x| x.pass_fraction).fold(1.0, f64::min);
    let b = l.finest().brackets[0].normalized;
    ensure(pass >= 0.9, format!("pass fraction {pass}"))?;
    ensure(b.contains(1.0), format!("bracket [{}, {}] misses 1", b.lower, b.upper))?;
    ensure(b.width() <= 0.2, format!("width {}", b.width()))?;
    ensure(secs < 60.0, format!("runtime {secs:.1}s"))?;
    Ok(format!(
        "d=400 pass {pass:.4}, normalized [{:.4}, {:.4}] width {:.4}, {secs:.2}s",
        b.lower,
        b.upper,
        b.width()
    ))
}

fn criterion_4() -> Outcome {
    let mut checked = 0;
    for k in 2..=4u64 {
        let levels: Vec<String> = (1..=50).map(|q| (k * q).to_string()).collect();
        let c = config(&format!(
            "id = \"acceptance-finite\"\nseed = 1\n[group]\nkind = \"cyclic\"\norder = {k}\n\
             [action]\nkind = \"finite-group-rep\"\ncharacters = [1]\n[approximation]\nkind = \"block\"\n\
             levels = [{}]\n[hom]\nf_radius = 1\nm = 1\ndelta = 0.1\nrungs = 1\nepsilons = [0.1]\n",
            levels.join(", ")
        ));
        let r = run(&c).map_err(|e| e.to_string())?;
        for l in &r.levels {
            let b = l.finest().brackets[0].normalized;
            let want = Ratio::new(1, k);
            ensure(
                b.lower_exact == want && b.upper_exact == want,
                format!("k={k} d={}: [{}, {}]", l.degree, b.lower_exact, b.upper_exact),
            )?;
            ensure(l.details["routes_agree"] == true, format!("k={k} d={}: rank and trace differ", l.degree))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} levels with normalized dimension exactly 1/k"))
}

fn criterion_5() -> Outcome {
    let c = config(
        r#"
id = "acceptance-rotation"
seed = 1
[group]
kind = "integers"
[action]
kind = "z-rotation"
angle = 3.8832220771374346
k = 16
samples = 4
[approximation]
kind = "folner"
levels = [216480, 220000]
[hom]
f_radius = 1
m = 1
delta = 0.01
rungs = 1
epsilons = [0.1]
"#,
    );
    let r = run(&c).map_err(|e| e.to_string())?;
    let mut seen = Vec::new();
    for l in &r.levels {
        let d = &l.details["rungs"][0];
        let n = l.degree as f64;
        let rn = d["blocks"]["r"].as_u64().unwrap() as f64 / n;
        let upper = l.finest().brackets[0].normalized.upper;
        ensure(d["audit"]["holds"] == true, format!("n={}: audit failed", l.degree))?;
        if rn <= 0.03 {
            ensure(upper <= 0.1, format!("n={}: upper {upper}", l.degree))?;
            seen.push(format!("n={} r/n={rn:.4} upper={upper:.4}", l.degree));
        }
    }
    ensure(!seen.is_empty(), "no level with r/n <= 0.03")?;
    Ok(format!("m={}, {}", r.levels[0].details["rungs"][0]["blocks"]["m"], seen.join("; ")))
}

fn criterion_6() -> Outcome {
    for radius in 1..=8 {
        let g = TruncatedCayleyGraph::new(2, radius).map_err(|e| e.to_string())?;
        let f = harmonic_generator_exact(&g).map_err(|e| e.to_string())?;
        let df = boundary_exact(&g, &f).map_err(|e| e.to_string())?;
        for v in 0..g.num_vertices() {
            if g.depth(v) < radius {
                ensure(df[v] == Ratio::from_integer(0), format!("R={radius}: boundary {} at {}", df[v], g.vertex(v)))?;
            }
        }
    }
    let mut report = Vec::new();
    for p in [1.5, 2.0] {
        let gap = (harmonic_norm_partial_sum(p, 30) - harmonic_norm_limit(p)).abs();
        ensure(gap <= 1e-6, format!("p={p}: shell-30 gap {gap:e}"))?;
        for shells in 1..=8 {
            let g = TruncatedCayleyGraph::new(2, shells).map_err(|e| e.to_string())?;
            let f = harmonic_generator(&g).map_err(|e| e.to_string())?;
            let enumerated: f64 = f.values.iter().map(|z| z.norm().powf(p)).sum();
            let closed = harmonic_norm_partial_sum(p, shells);
            ensure(
                (enumerated - closed).abs() <= 1e-12 * closed,
                format!("p={p} K={shells}: {enumerated} vs {closed}"),
            )?;
        }
        report.push(format!("p={p} gap {gap:.1e}"));
    }
    Ok(format!("exact zero boundary for R<=8; {}", report.join(", ")))
}

fn criterion_7() -> Outcome {
    let mut values = Vec::new();
    for radius in [4, 6, 8, 10] {
        values.push(spectral_gap_estimate(2, radius, 100_000, 1e-8).map_err(|e| e.to_string())?);
    }
    let top = values[3];
    ensure(top <= 0.9 && top < 1.0, format!("R=10 estimate {top}"))?;
    ensure(values.windows(2).all(|w| w[0] <= w[1]), format!("not monotone: {values:?}"))?;
    Ok(format!(
        "estimates {}",
        values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" <= ")
    ))
}

fn criterion_8() -> Outcome {
    let radius = 6;
    let g = TruncatedCayleyGraph::new(2, radius).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let mut rng = seeded_rng(800 + seed);
        let f = EdgeFunction {
            values: (0..g.num_edges())
                .map(|e| {
                    if g.edge_shell(e) < radius {
                        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect(),
        };
        let h = hodge_decompose(&g, &f, 1e-12).map_err(|e| e.to_string())?;
        let dg = coboundary(&g, &h.potential).map_err(|e| e.to_string())?;
        let ortho = h.harmonic.inner(&dg).norm();
        let again = hodge_decompose(&g, &h.harmonic, 1e-12).map_err(|e| e.to_string())?;
        let drift: f64 = again
            .harmonic
            .values
            .iter()
            .zip(&h.harmonic.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let m = h.solver_residual.max(h.reconstruction_residual).max(ortho).max(drift);
        ensure(m <= 1e-8, format!("seed {seed}: solver {:e} recon {:e} ortho {ortho:e} drift {drift:e}", h.solver_residual, h.reconstruction_residual))?;
        worst = worst.max(m);
    }
    Ok(format!("100 functions at R=6, worst residual/orthogonality/drift {worst:.1e}"))
}

const BETTI: &str = r#"
id = "acceptance-betti"
seed = 7
[group]
kind = "free"
rank = 2
[action]
kind = "betti"
radius = 5
telescoping_radii = [3, 4, 5]
[approximation]
kind = "random"
levels = [400]
[hom]
p = 2.0
f_radius = 1
m = 2
delta = 0.1
norm_bound = 2.0
epsilons = [0.1]
"#;

fn criterion_9() -> Outcome {
    let r = run(&config(BETTI)).map_err(|e| e.to_string())?;
    let b = r.largest_level().finest().brackets[0].normalized;
    ensure(b.contains(1.0), format!("bracket [{}, {}] misses 1", b.lower, b.upper))?;
    ensure(b.width() <= 0.3, format!("width {}", b.width()))?;
    let res: Vec<f64> = r.extra["telescoping"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["residual"].as_f64().unwrap())
        .collect();
    ensure(res.len() == 3 && res.windows(2).all(|w| w[1] < w[0]), format!("residuals {res:?}"))?;
    Ok(format!(
        "normalized [{:.4}, {:.4}] width {:.4}; residuals {}",
        b.lower,
        b.upper,
        b.width(),
        res.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" > ")
    ))
}

fn criterion_10() -> Outcome {
    let small_betti = BETTI.replace("levels = [400]", "levels = [60, 90]");
    let schatten = r#"
id = "acceptance-schatten"
seed = 3
[group]
kind = "free"
rank = 2
[action]
kind = "schatten-regular"
[approximation]
kind = "random"
levels = [12]
[hom]
f_radius = 1
m = 1
delta = 0.5
norm_bound = 2.0
epsilons = [0.1]
"#;
    let configs = [LP_FREE2.to_string(), small_betti, schatten.to_string()];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (i, s) in configs.iter().enumerate() {
        let c = config(s);
        let a = run(&c).map_err(|e| e.to_string())?;
        let b = run(&c).map_err(|e| e.to_string())?;
        let pa = dir.path().join(format!("a{i}.json"));
        let pb = dir.path().join(format!("b{i}.json"));
        a.write(&pa).map_err(|e| e.to_string())?;
        b.write(&pb).map_err(|e| e.to_string())?;
        let (ja, jb) = (std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
        ensure(ja == jb, format!("{}: reports differ", c.id))?;
    }
    Ok(format!("{} experiments re-run with byte-identical JSON", configs.len()))
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(msg) => println!("acceptance {n:>2}: PASS  {msg}"),
            Err(msg) => {
                failed += 1;
                println!("acceptance {n:>2}: FAIL  {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
