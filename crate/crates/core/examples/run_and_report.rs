//! Drives a run from TOML text the way the `anderson` binary does, then
//! renders its report.

use anderson_core::report::report;
use anderson_core::run::run_config_text;

const CONFIG: &str = r#"
experiment = "converge"
eps_list = [0.125, 0.0625, 0.03125]
k_indices = [1, 2, 3]
n_samples = 16
base_seed = 11

[domain]
kind = "ball"
center = [0.0, 0.0]
radius = 1.0

[model]
family = "uniform"
half_width = 2.0

[parameters]
fine_eps = 0.03125
"#;

fn main() -> anderson_core::Result<()> {
    let out = tempfile::tempdir()?;
    let dir = run_config_text(CONFIG, out.path(), None)?;
    let rendered = report(&dir)?;
    print!("{}", rendered.text);
    for f in &rendered.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
