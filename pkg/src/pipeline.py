from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import PipelineConfig
from errors import PreconditionError
from features import HeightSample, MotionSample
from forest import RandomForest, fit
from height import FEATURE_NAMES
from models import MotionClass
from motion_features import MOMENT_NAMES
from sparse_dictionary import ClassDictionary, dictionary_predict_batch, train_dictionary
from utils import logger
from utils.rng import derive_seed

# seed streams of the motion pipeline
_DICTIONARY_STREAM = 1
_FOREST_STREAM = 2


class HeightPipeline:
    """Regression forest over the eight speed/stride features of each window."""

    task = "height"

    def __init__(self, cfg: PipelineConfig, forest: Optional[RandomForest] = None):
        self.cfg = cfg
        self.forest = forest

    @property
    def feature_names(self) -> Tuple[str, ...]:
        return FEATURE_NAMES

    @staticmethod
    def matrix(samples: Sequence[HeightSample]) -> np.ndarray:
        return np.array([s.features for s in samples]).reshape(len(samples), len(FEATURE_NAMES))

    def fit(self, samples: Sequence[HeightSample], targets: Sequence[float], seed: int = 0) -> "HeightPipeline":
        return self.fit_matrix(self.matrix(samples), targets, seed)

    def fit_matrix(self, X: np.ndarray, targets: Sequence[float], seed: int = 0) -> "HeightPipeline":
        self.forest = fit(X, np.asarray(targets, dtype=float), self.cfg.forest_height, seed)
        return self

    def predict(self, samples: Sequence[HeightSample]) -> np.ndarray:
        if self.forest is None:
            raise PreconditionError("height pipeline is not trained")
        return np.atleast_1d(self.forest.predict(self.matrix(samples)))

    @property
    def importances(self) -> np.ndarray:
        return self.forest.importances if self.forest else np.zeros(len(FEATURE_NAMES))


class BoulicBaseline:
    """Closed-form average-human height, nothing to train."""

    task = "height"

    def fit(self, samples: Sequence[HeightSample], targets: Sequence[float], seed: int = 0) -> "BoulicBaseline":
        return self

    def predict(self, samples: Sequence[HeightSample]) -> np.ndarray:
        return np.array([s.baseline.h for s in samples])


class MotionPipeline:
    """
    Class dictionaries vote through a one-hot vector that joins the Doppler
    moments and the orientation histogram as input to a classification forest.
    """

    task = "motion"

    def __init__(
        self,
        cfg: PipelineConfig,
        dictionaries: Optional[List[ClassDictionary]] = None,
        forest: Optional[RandomForest] = None,
    ):
        self.cfg = cfg
        self.dictionaries = dictionaries or []
        self.forest = forest

    @property
    def feature_names(self) -> Tuple[str, ...]:
        names = list(MOMENT_NAMES)
        names += [f"hog_{b}" for b in range(self.cfg.grid.hog_bins)]
        names += [f"dict_{c.label}" for c in MotionClass]
        if self.cfg.dictionary.error_features:
            names += [f"dict_error_{c.label}" for c in MotionClass]
        return tuple(names)

    def matrix(self, samples: Sequence[MotionSample]) -> np.ndarray:
        if not self.dictionaries:
            raise PreconditionError("motion pipeline has no class dictionaries")
        base = np.array([s.base_features for s in samples])
        images = np.array([s.image for s in samples])
        _, one_hot, errors = dictionary_predict_batch(images, self.dictionaries)
        parts = [base, one_hot]
        if self.cfg.dictionary.error_features:
            # classes without a dictionary keep a constant column
            full = np.zeros((len(samples), len(MotionClass)))
            for col, d in enumerate(sorted(self.dictionaries, key=lambda d: int(d.motion))):
                full[:, int(d.motion)] = errors[:, col]
            parts.append(full)
        return np.hstack(parts)

    def fit(self, samples: Sequence[MotionSample], targets: Sequence[int], seed: int = 0) -> "MotionPipeline":
        targets = np.asarray(targets, dtype=np.int64)
        images = np.array([s.image for s in samples])
        dcfg = self.cfg.dictionary

        self.dictionaries = []
        for code in np.unique(targets):
            motion = MotionClass(int(code))
            class_images = images[targets == code]
            atoms = min(dcfg.atoms, len(class_images))
            if atoms < dcfg.atoms:
                logger.warning(f"{motion.label}: only {len(class_images)} training images, using {atoms} atoms")
            self.dictionaries.append(
                train_dictionary(
                    class_images,
                    K=atoms,
                    lam=dcfg.lam,
                    epochs=dcfg.epochs,
                    seed=derive_seed(seed, _DICTIONARY_STREAM, int(code)),
                    motion=motion,
                    tol=dcfg.tol,
                    max_sweeps=dcfg.max_sweeps,
                )
            )

        self.forest = fit(self.matrix(samples), targets, self.cfg.forest_motion, derive_seed(seed, _FOREST_STREAM))
        return self

    def predict(self, samples: Sequence[MotionSample]) -> np.ndarray:
        if self.forest is None:
            raise PreconditionError("motion pipeline is not trained")
        return np.atleast_1d(self.forest.predict(self.matrix(samples))).astype(np.int64)

    def dictionary_votes(self, samples: Sequence[MotionSample]) -> List[MotionClass]:
        classes, _, _ = dictionary_predict_batch(np.array([s.image for s in samples]), self.dictionaries)
        return classes

    @property
    def importances(self) -> np.ndarray:
        return self.forest.importances if self.forest else np.zeros(len(self.feature_names))


def describe_importances(names: Sequence[str], importances: np.ndarray) -> Dict[str, float]:
    return {name: float(value) for name, value in zip(names, importances)}
