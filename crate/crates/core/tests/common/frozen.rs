//! Values computed once with `brute_recurrence` for fixed seeds and frozen.

pub const NOISY_MEAN_SEED_2024: f64 = 1.776758895840112;
pub const SWITCH_AFTER_SEED_2024: f64 = 1.8140640609315812;

/// Mean recurrence (w = 10) per run of `EnsembleSpec::default_grid(7)`.
pub const DEFAULT_GRID_SEED_7: [(&str, f64); 30] = [
    ("d1.0_beta-4.5", 0.0),
    ("d1.0_beta-3.4", 0.0),
    ("d1.0_beta-2.7", 0.0),
    ("d1.0_beta-2.3", 0.0),
    ("d1.0_beta-1.0", 0.0),
    ("d1.0_beta0.0", 0.0),
    ("d1.5_beta-4.5", 0.0),
    ("d1.5_beta-3.4", 0.0),
    ("d1.5_beta-2.7", 0.0),
    ("d1.5_beta-2.3", 0.0),
    ("d1.5_beta-1.0", 0.0),
    ("d1.5_beta0.0", 0.0),
    ("d2.0_beta-4.5", 2.157473000462119),
    ("d2.0_beta-3.4", 2.003707277477691),
    ("d2.0_beta-2.7", 1.6189935954721801),
    ("d2.0_beta-2.3", 1.5034829219580699),
    ("d2.0_beta-1.0", 0.9561794956332111),
    ("d2.0_beta0.0", 0.504591494768167),
    ("d2.5_beta-4.5", 2.1130863388682988),
    ("d2.5_beta-3.4", 1.8285500066456415),
    ("d2.5_beta-2.7", 1.6316563678932923),
    ("d2.5_beta-2.3", 1.6170464959592932),
    ("d2.5_beta-1.0", 0.9249023136835536),
    ("d2.5_beta0.0", 0.5228371184066145),
    ("d3.0_beta-4.5", 2.154456804692318),
    ("d3.0_beta-3.4", 1.9809123524665233),
    ("d3.0_beta-2.7", 1.617162593165501),
    ("d3.0_beta-2.3", 1.5265097422091318),
    ("d3.0_beta-1.0", 0.954433606838278),
    ("d3.0_beta0.0", 0.49625894781723995),
];
