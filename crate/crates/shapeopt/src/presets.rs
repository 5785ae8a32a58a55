//! Named configurations. A run file selects one with `preset = "<name>"`
//! and overrides any of its keys.

const PERIMETER_BASE: &str = r#"
[problem]
n_s = 32
layers = 2
gamma = 0.04
source = { kind = "gaussian", center = [0.0, 0.0], width = 8.0 }
target = "baseline"
area_target = "initial"

[parameterization]
kind = "nonlinear_radial"
basis = "nodal"
alpha = 0.0
initial = { radial_modes = [[2.0, 0.05, 0.0], [4.0, 0.0, 0.03]] }

[smoothing]
eps1 = 0.004
eps2 = 0.04
eps3 = 0.0

[optimizer]
algorithm = "sqp_eq"
tol = 1e-6
max_iter = 5000
"#;

const ANNULUS_BASE: &str = r#"
[problem]
n_s = 32
layers = 4
area_target = "baseline"
radius_min = 0.9

[parameterization]
kind = "hicks_henne"
per_side = 6

[smoothing]
eps1 = 0.1
eps2 = 0.05
eps3 = 0.01
"#;

const NACA_BASE: &str = r#"
[problem]
n_s = 80
layers = 4
area_target = "baseline"
radius_min = 0.9

[parameterization]
kind = "hicks_henne"
per_side = 19
exponent = 3.0

[optimizer]
tol = 1e-6
max_iter = 300
"#;

const ONERA_BASE: &str = r#"
[problem]
n_s = 64
layers = 4
gamma = 3.0
area_target = "baseline"
radius_min = 0.9

[parameterization]
kind = "ffd"
nx = 11
ny = 2
margin = 0.1
axis = "y"

[smoothing]
eps1 = 56.9
eps2 = 0.9
eps3 = 0.1
formulation = "surface"

[optimizer]
tol = 1e-6
max_iter = 400
"#;

struct Preset {
    name: &'static str,
    base: &'static str,
    overlay: &'static str,
}

const PRESETS: &[Preset] = &[
    Preset {
        name: "perimeter-sobolev",
        base: PERIMETER_BASE,
        overlay: "[optimizer]\nhessian = \"sobolev\"\n",
    },
    Preset {
        name: "perimeter-identity",
        base: PERIMETER_BASE,
        overlay: "[optimizer]\nhessian = \"identity\"\nidentity_scale = 1.0\n",
    },
    Preset {
        name: "annulus-sqp",
        base: ANNULUS_BASE,
        overlay: "[optimizer]\nalgorithm = \"sqp_mixed\"\ntol = 1e-9\nmax_iter = 500\n",
    },
    Preset {
        name: "annulus-oneshot",
        base: ANNULUS_BASE,
        overlay: "[optimizer]\nalgorithm = \"oneshot_constrained\"\ninner_steps = 10\nmax_design_update = 5e-3\ntol = 1e-8\nmax_iter = 3000\n",
    },
    Preset {
        name: "naca-analogue-sobolev",
        base: NACA_BASE,
        overlay: "[smoothing]\neps1 = 1.0\neps2 = 0.0625\neps3 = 0.0\n\n[optimizer]\nalgorithm = \"sqp_mixed\"\n",
    },
    Preset {
        name: "naca-analogue-gradient-descent",
        base: NACA_BASE,
        overlay: "[optimizer]\nalgorithm = \"grad_desc\"\nhessian = \"identity\"\nstep = 0.5\n",
    },
    Preset {
        name: "onera-analogue-surface",
        base: ONERA_BASE,
        overlay: "[optimizer]\nalgorithm = \"sqp_mixed\"\n",
    },
    Preset {
        name: "onera-analogue-volume",
        base: ONERA_BASE,
        overlay: "[smoothing]\neps1 = 0.0\neps2 = 7.1\neps3 = 0.1\nformulation = \"volume\"\n\n[optimizer]\nalgorithm = \"sqp_mixed\"\n",
    },
    Preset {
        name: "onera-analogue-oneshot",
        base: ONERA_BASE,
        overlay: "[optimizer]\nalgorithm = \"oneshot_constrained\"\ninner_steps = 10\nmax_design_update = 5e-3\nmax_iter = 1000\n",
    },
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

/// The preset as one TOML document.
pub fn preset_toml(name: &str) -> Option<&'static str> {
    static CACHE: std::sync::OnceLock<Vec<(&'static str, String)>> = std::sync::OnceLock::new();
    let all = CACHE.get_or_init(|| {
        PRESETS
            .iter()
            .map(|p| {
                let mut v = crate::config::parse_toml_value(p.base, p.name).expect("preset base parses");
                let top = crate::config::parse_toml_value(p.overlay, p.name).expect("preset overlay parses");
                crate::config::deep_merge(&mut v, top);
                let t: toml::Value = serde_json::from_value(v).expect("preset converts");
                (p.name, toml::to_string(&t).expect("preset serializes"))
            })
            .collect()
    });
    all.iter().find(|(n, _)| *n == name).map(|(_, t)| t.as_str())
}
