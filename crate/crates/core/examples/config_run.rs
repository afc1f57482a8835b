//! Config-driven runs through the library: parse, run with a checkpoint,
//! resume from it, and sweep the friction.

use ddft::io::parse_config;
use ddft::run::{resume, run, sweep, RunOptions};

const CONFIG: &str = r#"
engine = "dks"

[grid]
n = 256
length = 20.0
boundary = "periodic"

[params]
temperature = 1.0
friction = 10.0
entropy_form = "boltzmann"

[params.toggles]
tf = false
weizsacker = true
hartree = false
dirac = false
entropy = true

[initial]
kind = "gaussian"
center = 10.0
sigma2 = 0.5

[potential]
kind = "harmonic"
omega = 1.0
center = 10.0

[schedule]
t_end = 1.0
cadence = 0.25
time_scale = "friction"

[outputs]
checkpoint_every = 0.5

[dks]
compare_diffusion = true
"#;

fn main() -> ddft::Result<()> {
    let root = std::env::temp_dir().join("ddft_config_run");
    let cfg = parse_config(CONFIG)?;
    println!("config hash {}", cfg.hash()?);
    let opts = |dir: &str| RunOptions {
        out_dir: Some(root.join(dir)),
        quiet: true,
        ..RunOptions::default()
    };

    let full = run(&cfg, &opts("full"))?;
    println!("full run: t = {}, max L1 vs diffusion {:.3e}", full.t_final, full.l1_max.unwrap_or(f64::NAN));

    let resumed = resume(&root.join("full").join("checkpoint.txt"), None, false, &opts("resumed"))?;
    println!("resumed from the checkpoint: t = {}, energy {:.12e}", resumed.t_final, resumed.energy_final);
    println!("uninterrupted:                t = {}, energy {:.12e}", full.t_final, full.energy_final);

    let values: Vec<String> = ["10", "30", "100"].map(String::from).to_vec();
    let report = sweep(&cfg.to_value()?, "params.friction", &values, &opts("sweep"))?;
    print!("{}", report.to_csv());
    println!("outputs under {}", root.display());
    Ok(())
}
