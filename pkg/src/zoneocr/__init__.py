"""Handwritten character recognition from zoning density features with KNN and MLP classifiers."""

__version__ = "0.1.0"

from .raster import BinaryImage, GrayImage, RawDataset, load_dataset, read_pgm, write_pgm
from .preprocess import PreprocessConfig, preprocess_pipeline
from .zoning import FeatureTable, GridSpec, extract_all, grid_entropy, zone_densities
from .knn import knn_fit, knn_predict, knn_predict_batch
from .mlp import TrainHyperparams, mlp_init, mlp_predict, mlp_train
from .evaluate import evaluate_knn, evaluate_mlp, stratified_split, sweep_epochs, sweep_k, sweep_split
from .synth import SynthConfig, gen_corpus, gen_glyph
