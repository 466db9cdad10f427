"""
Configuration settings for the EEG diffusion augmentation toolbox
"""

# Numeric Settings
DTYPE = "float64"
GRADCHECK_STEP = 1e-5

# Full-Scale Model Settings (128x128 EFDMs)
FULL_IMAGE_SIZE = 128
FULL_NUM_CHANNELS = 128
FULL_NUM_RES_BLOCKS = 3
FULL_DIFFUSION_STEPS = 1000
FULL_NOISE_SCHEDULE = "linear"
FULL_LR = 1e-4
FULL_BATCH_SIZE = 32
FULL_CLASSIFIER_BATCH_SIZE = 128
FULL_CLASSIFIER_LR = 1e-4

# Published reference rows written next to every summary (max average accuracy, percent)
PUBLISHED_REFERENCE_ROWS = {
    "Original": 91.434,
    "Augmented 40 epochs": 92.634,
    "Augmented 60 epochs": 92.984,
}

# Synthetic Recording Defaults (8-channel cap at 250 Hz)
SYNTH_CHANNELS = 8
SYNTH_SAMPLE_RATE_HZ = 250.0
SYNTH_DURATION_S = 700.0
SYNTH_NOISE_SIGMA = 0.1
SYNTH_TONES = 4
SYNTH_CLASSES = [
    # (label, band_center_hz, band_width_hz, amplitude)
    ("happy", 10.0, 4.0, 1.0),
    ("sad", 30.0, 10.0, 1.0),
]

# STFT / EFDM
CUT_HZ = 100.0
EFDM_IMAGE_SIZE = FULL_IMAGE_SIZE
DESK_IMAGE_SIZE = 32
MIN_WSIZE = 4

# Desk-scale Diffusion Defaults
DIFFUSION_IMAGE_SIZE = DESK_IMAGE_SIZE
DIFFUSION_STEPS = 200
DIFFUSION_CHANNELS = 32
DIFFUSION_RES_BLOCKS = 2
DIFFUSION_LR = FULL_LR
DIFFUSION_BATCH_SIZE = FULL_BATCH_SIZE
DIFFUSION_EPOCHS = 15
GROUP_NORM_GROUPS = 8
TIME_EMBED_DIM = 64
BETA_START = 1e-4
BETA_END = 0.02
BETA_MAX = 0.999

# Adam
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Classifier
CLASSIFIER_BATCH_SIZE = FULL_CLASSIFIER_BATCH_SIZE
CLASSIFIER_LR = FULL_CLASSIFIER_LR
CLASSIFIER_EPOCHS = 10

# Experiment Harness (desk scale; full scale is 20 runs x 20 epochs, 24000/6000/15000)
EXPERIMENT_RUNS = 5
EXPERIMENT_EPOCHS = 10
EXPERIMENT_TRAIN_PER_CLASS = 2000
EXPERIMENT_TEST_PER_CLASS = 500
EXPERIMENT_SYNTH_PER_CLASS = 1200
EXPERIMENT_CHECKPOINTS = [40, 60]
CONFIDENCE_LEVEL = 0.95

# File Settings
RECORDING_EXTENSION = ".eegr"
DATASET_EXTENSION = ".efdm"
CHECKPOINT_EXTENSION = ".ddpm"
CLASSIFIER_EXTENSION = ".clf"
CURVES_FILE = "curves.csv"
SUMMARY_FILE = "summary.csv"

# Runtime
DEFAULT_SEED = 0
DEFAULT_THREADS = 1
