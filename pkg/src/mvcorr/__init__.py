"""Multi-view correlation analysis: linear, kernel and deep CCA, split autoencoders and DCC-LSTM."""
from .cca import CcaModel, cca_reconstruction_objective, cca_transform, fit_cca
from .corr import CorrConfig, corr_captured, corr_objective
from .data import SequenceDataset, SynthSpec, Utterance, generate_synthetic, load_dataset, save_dataset
from .evaluation import EvalConfig, EvalReport, evaluate_pipeline, knn_classify, nn_reconstruct
from .kcca import KccaModel, KernelSpec, fit_kcca, kcca_transform
from .models import CCA, DCCA, DCCLSTM, KernelCCA, SplitAE
from .train import TrainConfig, train_dcca, train_dcclstm, train_splitae

__version__ = "0.1.0"

__all__ = [
    "CCA", "DCCA", "DCCLSTM", "KernelCCA", "SplitAE",
    "CcaModel", "CorrConfig", "EvalConfig", "EvalReport", "KccaModel", "KernelSpec", "SequenceDataset",
    "SynthSpec", "TrainConfig", "Utterance",
    "cca_reconstruction_objective", "cca_transform", "corr_captured", "corr_objective", "evaluate_pipeline",
    "fit_cca", "fit_kcca", "generate_synthetic", "kcca_transform", "knn_classify", "load_dataset",
    "nn_reconstruct", "save_dataset", "train_dcca", "train_dcclstm", "train_splitae",
]
