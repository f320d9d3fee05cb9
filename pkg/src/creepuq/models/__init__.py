from .registry import MODEL_LABELS, MODEL_NAMES, FittedModel, fit_model

__all__ = ["MODEL_LABELS", "MODEL_NAMES", "FittedModel", "fit_model"]
