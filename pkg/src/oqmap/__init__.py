"""Quantized open baker maps: resonance spectra, fractal Weyl counts and Walsh-model transport."""

from .classical import BakerParams, Point, WeightedRelation, baker_image, cantor_dimension, toy_images
from .maps import (
    OmegaBlock,
    build_open_baker,
    build_toy_baker,
    build_walsh_2baker,
    build_walsh_open_baker,
    omega_block,
)
from .spectral import (
    ResonanceSpectrum,
    count_at_radius,
    eigenvalues,
    oracle_match,
    walsh_analytic_spectrum,
    weyl_fit,
)
from .torus import PlanckGrid, QuantumMap, QuDitWord, TorusState, TrigObservable, dft_matrix, walsh_matrix
from .transport import LeadConfig, classify_channel, conductance, fano, noise_power, transmission_matrix

__version__ = "0.1.0"
