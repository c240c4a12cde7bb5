from .dynamics import (
    GRAVITY,
    PendulumDataset,
    PendulumParams,
    consistency_residual,
    energy,
    pendulum_field,
    roughness,
    sample_dataset,
    save_dataset_csv,
    simulate,
    white_noise_like,
)
from .generators import (
    OdeSequenceGenerator,
    PendulumTrainConfig,
    RnnSequenceGenerator,
    load_pendulum_generator,
    matched_rnn_hidden,
    save_pendulum_generator,
    train_pendulum_generator,
)

__all__ = [
    "GRAVITY",
    "OdeSequenceGenerator",
    "PendulumDataset",
    "PendulumParams",
    "PendulumTrainConfig",
    "RnnSequenceGenerator",
    "consistency_residual",
    "energy",
    "load_pendulum_generator",
    "matched_rnn_hidden",
    "pendulum_field",
    "roughness",
    "sample_dataset",
    "save_pendulum_generator",
    "save_dataset_csv",
    "simulate",
    "train_pendulum_generator",
    "white_noise_like",
]
