import math

# x = [theta1 theta2 dtheta1 dtheta2 dphi1 dphi2]; sensor j measures x[j - 1]
STATE_NAMES = ['theta1', 'theta2', 'dtheta1', 'dtheta2', 'dphi1', 'dphi2']
N_STATES = 6
N_INPUTS = 2
SENSORS = (1, 2, 3, 4, 5, 6)

SENSOR_KIND = {
    1: 'link_position',
    2: 'link_position',
    3: 'link_velocity',
    4: 'link_velocity',
    5: 'wheel_velocity',
    6: 'wheel_velocity',
}

# initial conditions are drawn uniformly from this box
INITIAL_CONDITION_BOX = [
    (-math.pi / 4, math.pi / 4),
    (-math.pi / 4, math.pi / 4),
    (-6.8, 6.8),
    (-6.8, 6.8),
    (-300.0, 300.0),
    (-300.0, 300.0),
]

HOLD_LAST = 'hold_last'
ZERO = 'zero'
CONSTANT = 'constant'
FAULT_MODES = (HOLD_LAST, ZERO, CONSTANT)

# abrupt faults admitted per sensor kind during augmentation
AUGMENT_FAULT_MODES = {
    'link_position': (HOLD_LAST, ZERO, CONSTANT),
    'link_velocity': (ZERO,),
    'wheel_velocity': (ZERO,),
}
POSITION_CONSTANT_RANGE = (-math.pi, math.pi)

TRAIN_SPLIT = 'train'
VAL_SPLIT = 'val'
TEST_SPLIT = 'test'
SPLIT_FRACTIONS = {TRAIN_SPLIT: 0.8, VAL_SPLIT: 0.1, TEST_SPLIT: 0.1}

# named random sub-streams derived from the global seed
STREAMS = ('gen', 'augment', 'split', 'init', 'train', 'eval', 'gramian', 'noise')

NO_FAULT = 'no_fault'
FAULT = 'fault'
CONDITIONS = (NO_FAULT, FAULT)
FAULT_MIXES = ('none', 'augment', 'max_range')
CONTROLLERS = ('baseline', 'dftc', 'fnn')

DATASET_COLUMNS = (
    ['traj_id', 'step', 't']
    + ['x%d' % i for i in SENSORS]
    + ['u1', 'u2']
    + ['y%d' % i for i in SENSORS]
    + ['fault_sensor', 'fault_mode', 'fault_value', 'fault_time', 'split']
)

RANKING_COLUMNS = ['config', 'active_sensors', 'J', 'status']
CURVE_COLUMNS = ['epoch', 'train_loss', 'val_loss']
RUNS_COLUMNS = [
    'controller', 'scenario', 'condition', 'fault_sensor', 'fault_mode',
    'fault_time', 'J', 'rho', 'settled', 'diverged', 'max_abs_dphi',
]
TRAJECTORY_COLUMNS = (
    ['t']
    + ['x%d' % i for i in SENSORS]
    + ['u1', 'u2']
    + ['y%d' % i for i in SENSORS]
)

FLOAT_FORMAT = '.17g'
