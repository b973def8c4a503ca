#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quasikin"))
}

/// Runs `quasikin <sub> --config <cfg> --out <out> [extra...]`.
pub fn run(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(sub)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("QUASIKIN_THREADS")
        .output()
        .expect("binary runs")
}

pub fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Every check selected, at sizes that finish in seconds.
pub const SMALL_CAMPAIGN: &str = r#"
seed = 11

[verify]
campaign = "smoke"

[verify.mc_wick]
period = 3.0
cutoff = 1.5
nu = 0.2
samples = 60
probes = 4

[verify.theorem_a]
nus = [0.4, 0.3, 0.2]
rule = { reach = 4.0, r_panel = 1.0, r_nodes = 6, angles = 12, q_panel = 1.0, q_nodes = 6, w_nodes = 8, w_first = 0.25, p_cap = 0.75 }

[verify.sum_vs_integral]
nu = 0.3
periods = [3.0, 6.0]
prune = 3.0
sweep = []
rule = { reach = 4.0, r_panel = 1.0, r_nodes = 6, angles = 12, q_panel = 1.0, q_nodes = 6, w_nodes = 8, w_first = 0.25, p_cap = 0.75 }

[verify.kinetic]
support = 4.0
probes = 4

[verify.n2_table]
nu = 0.2
dr = 0.5
nodes = 4
taus = [-1.0, -0.5, 0.0, 0.1, 0.2, 0.5, 1.0, 5.0]

[verify.main_theorem]
h = 0.1
tail = [5.0]

[verify.representation]
nus = [0.4, 0.3]
radii = [0.0]

[verify.oscillating]
nus = [0.4, 0.3, 0.2]
rule = { reach = 4.0, r_panel = 1.0, r_nodes = 6, angles = 12, q_panel = 1.0, q_nodes = 6, w_nodes = 8, w_first = 0.25, p_cap = 0.75 }

[verify.stability]
dr = 0.5
nodes = 5
h = 0.1
tau_end = 1.5

[verify.delta1]
samples = 200

[verify.remainder]
period = 2.0
cutoff = 1.0
samples = 40
probes = 3
"#;

pub const SMALL_SIMULATE: &str = r#"
seed = 5

[lattice]
d = 2
period = 3.0
cutoff = 1.5

[params]
nu = 0.2
eps = 0.05
horizon = 1.0
taus = [-0.5, 0.0]

[simulate]
samples = 40
with_a2 = true
"#;
