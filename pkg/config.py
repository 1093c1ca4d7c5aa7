LOGGING_LEVEL = 'INFO'

CELERY_BROKER = 'pyamqp://guest@localhost:6672/dftc_pipeline'

SEED = 0

# keys follow the plant section of the run configuration file
PLANT = {
    'I_p': 0.02,
    'I_w': 5.12e-4,
    'ml': 0.3,
    'g': 9.81,
    'k_s': 5.0,
    'b_th': 0.01,
    'b_ph': 1e-5,
    'k_T': 0.0369,
    'i_max': 5.0,
    'noise_std': 0.0,
}

GRAMIAN = {
    'epsilon': 1e-4,
    'horizon': 4.0,
    'step': 1e-3,
    'n_base_points': 8,
    'probe_policy': 'closed_loop',
    'extra_configs': [],
    'search_k': 2,
}

BASELINE = {
    'h': 0.01,
    'Q': [5e4, 5e4, 5e2, 1e2, 1e-2, 1e-2],
    'R': [1e-5, 1e-5],
    'tol': 1e-12,
    'max_iter': 200000,
}

DATASET = {
    'n_traj': 300,
    'duration': 4.0,
    'h': 0.01,
    'window': 10,
}

AUGMENT = {
    'copies_per_trajectory': 2,
    'fault_window': [0.3, 2.0],
}

TRAIN = {
    'epochs': 40,
    'batch_size': 256,
    'lr': 1e-3,
    'lr_drop_epoch': 100,
    'lr_after_drop': 5e-4,
    'l2': 1e-3,
    'rms_decay': 0.99,
    'rms_eps': 1e-8,
    'samples_per_epoch': 8192,
    'val_samples': 8192,
    'hidden': 32,
    'fc_sizes': [64, 64],
}

FNN_TRAIN = {
    'epochs': 40,
    'batch_size': 256,
    'lr': 1e-3,
    'lr_drop_epoch': 100,
    'lr_after_drop': 5e-4,
    'l2': 1e-3,
    'rms_decay': 0.99,
    'rms_eps': 1e-8,
    'samples_per_epoch': 0,
    'val_samples': 0,
    'fc_sizes': [64, 64],
}

EVAL = {
    'n_scenarios': 100,
    'duration': 4.0,
    'h': 0.01,
    'fault_mix': 'augment',
    'controllers': ['baseline', 'dftc', 'fnn'],
    'sensor_range': [1.5707963267948966, 1.5707963267948966, 20.0, 20.0, 400.0, 400.0],
    'settle_tol': 0.05,
    'settle_hold': 0.5,
    'divergence_bound': 1e6,
    'max_diverged_fraction': 1.0,
    'timing_calls': 1000,
}

PATHS = {
    'out': './live',
    'dataset_raw': 'dataset_raw.csv',
    'dataset_augmented': 'dataset_augmented.csv',
    'dataset': 'dataset.csv',
    'model': 'model_dftc.json',
    'fnn_model': 'model_fnn.json',
    'curve': 'curve_dftc.csv',
    'fnn_curve': 'curve_fnn.csv',
    'gramian': 'gramian.csv',
    'gain': 'gain.json',
    'report': 'report',
}
