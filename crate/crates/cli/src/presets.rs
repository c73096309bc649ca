//! Built-in configs.

/// `(name, document)` for every preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("convdiff-n127", include_str!("../presets/convdiff-n127.toml")),
    ("convdiff-plateau", include_str!("../presets/convdiff-plateau.toml")),
    ("convdiff", include_str!("../presets/convdiff.toml")),
    ("eigen-rhs", include_str!("../presets/eigen-rhs.toml")),
    ("heat-param", include_str!("../presets/heat-param.toml")),
    ("multi-rhs-convdiff", include_str!("../presets/multi-rhs-convdiff.toml")),
    ("multi-rhs-poisson", include_str!("../presets/multi-rhs-poisson.toml")),
    ("param-convdiff-n127", include_str!("../presets/param-convdiff-n127.toml")),
    ("param-convdiff", include_str!("../presets/param-convdiff.toml")),
    ("poisson-n127", include_str!("../presets/poisson-n127.toml")),
    ("poisson-n255", include_str!("../presets/poisson-n255.toml")),
    ("poisson", include_str!("../presets/poisson.toml")),
    ("prec-sweep", include_str!("../presets/prec-sweep.toml")),
    ("relaxed-compare", include_str!("../presets/relaxed-compare.toml")),
];

pub fn get(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// First comment line of a preset.
pub fn describe(text: &str) -> &str {
    text.lines().next().and_then(|l| l.strip_prefix('#')).map_or("", str::trim)
}
