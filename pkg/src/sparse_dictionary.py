"""Class-specific sparse dictionaries over grid spectra.

Objective per image: 0.5 * ||x - D a||^2 + lam * ||a||_1, with every atom
(column of D) constrained to norm <= 1. Codes come from cyclic coordinate
descent; dictionaries from online block-coordinate updates on the sufficient
statistics A = sum a a^T and B = sum x a^T.
"""

from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from errors import PreconditionError
from models import MotionClass
from motion_features import DopplerGrid
from utils import logger, progress_enabled

# statistics below this mark an atom as unused
_UNUSED_ATOM = 1e-10
# reconstruction errors closer than this count as a tie
_TIE = 1e-12


@dataclass(frozen=True)
class DictionaryConfig:
    atoms: int = 16
    lam: float = 0.1
    epochs: int = 10
    tol: float = 1e-8
    max_sweeps: int = 1000
    error_features: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ClassDictionary:
    motion: MotionClass
    atoms: np.ndarray
    lam: float
    objective_history: List[float] = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.atoms.shape[1]

    @property
    def P(self) -> int:
        return self.atoms.shape[0]


@dataclass(frozen=True)
class SparseCode:
    coefficients: np.ndarray
    reconstruction_error: float
    converged: bool


def spectral_image(grid: DopplerGrid | np.ndarray) -> np.ndarray:
    cells = grid.cells if isinstance(grid, DopplerGrid) else np.asarray(grid, dtype=float)
    image = np.fft.fftshift(np.abs(np.fft.fft2(cells))).ravel()
    norm = np.linalg.norm(image)
    return image / norm if norm > 0 else image


def _soft(z: np.ndarray, lam: float) -> np.ndarray:
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def sparse_code_batch(
    X: np.ndarray,
    atoms: np.ndarray,
    lam: float,
    tol: float = 1e-8,
    max_sweeps: int = 1000,
    init: Optional[np.ndarray] = None,
    gram: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    codes every row of X against `atoms`; returns (codes n x K, errors n, converged n)

    A row stops being updated after its first sweep with every coefficient
    change below `tol`, so each row gets the code it would get on its own.
    `init` warm-starts the codes; `gram` is atoms^T atoms when already known.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != atoms.shape[0]:
        raise PreconditionError(f"image length {X.shape[1]} does not match dictionary rows {atoms.shape[0]}")

    if gram is None:
        gram = atoms.T @ atoms
    diag = np.diag(gram)
    n, k_atoms = X.shape[0], atoms.shape[1]
    codes = np.zeros((n, k_atoms)) if init is None else np.atleast_2d(np.array(init, dtype=float))
    # corr[:, k] = D_k^T (x - D a)
    corr = X @ atoms
    if init is not None:
        corr -= codes @ gram
    converged = np.zeros(n, dtype=bool)
    active = np.arange(n)

    for _ in range(max_sweeps):
        sub, sub_corr = codes[active], corr[active]
        step = np.zeros(len(active))
        for k in range(k_atoms):
            if diag[k] <= 0:
                continue
            old = sub[:, k]
            new = _soft(sub_corr[:, k] + diag[k] * old, lam) / diag[k]
            delta = new - old
            if not delta.any():
                continue
            sub[:, k] = new
            sub_corr -= np.outer(delta, gram[k])
            np.maximum(step, np.abs(delta), out=step)
        codes[active], corr[active] = sub, sub_corr
        done = step < tol
        converged[active[done]] = True
        active = active[~done]
        if not len(active):
            break

    resid = X - codes @ atoms.T
    errors = np.einsum("ij,ij->i", resid, resid) / X.shape[1]
    return codes, errors, converged


def sparse_code(x: np.ndarray, D: ClassDictionary, tol: float = 1e-8, max_sweeps: int = 1000) -> SparseCode:
    codes, errors, converged = sparse_code_batch(x, D.atoms, D.lam, tol, max_sweeps)
    if not converged[0]:
        logger.debug(f"sparse code for {D.motion.label} did not converge in {max_sweeps} sweeps")
    return SparseCode(coefficients=codes[0], reconstruction_error=float(errors[0]), converged=bool(converged[0]))


def lasso_objective(X: np.ndarray, atoms: np.ndarray, codes: np.ndarray, lam: float) -> np.ndarray:
    X, codes = np.atleast_2d(X), np.atleast_2d(codes)
    resid = X - codes @ atoms.T
    return 0.5 * np.einsum("ij,ij->i", resid, resid) + lam * np.abs(codes).sum(axis=1)


def _project_atoms(atoms: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(atoms, axis=0)
    return atoms / np.maximum(norms, 1.0)


def train_dictionary(
    images: Sequence[np.ndarray] | np.ndarray,
    K: int = 16,
    lam: float = 0.1,
    epochs: int = 10,
    seed: int = 0,
    motion: MotionClass = MotionClass.WALK,
    tol: float = 1e-8,
    max_sweeps: int = 1000,
) -> ClassDictionary:
    """
    Online dictionary learning, one image at a time.

    The whole set is re-coded at every epoch boundary; inside an epoch an
    image's new code replaces its previous contribution to A and B. Each step
    then minimises the full-set objective over one block, so the recorded
    per-epoch objective never increases.
    """
    X = np.asarray(images, dtype=float)
    if X.ndim != 2:
        raise PreconditionError("images must share one length")
    n, p = X.shape
    if K < 1 or lam <= 0:
        raise PreconditionError(f"need K >= 1 and lam > 0, got K={K}, lam={lam}")
    if n < K:
        raise PreconditionError(f"{K} atoms need at least {K} images, got {n}")

    rng = np.random.default_rng(seed)
    atoms = _project_atoms(X[rng.choice(n, K, replace=False)].T.copy())

    def refresh(init: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        codes, errors, _ = sparse_code_batch(X, atoms, lam, tol, max_sweeps, init=init)
        history.append(float(lasso_objective(X, atoms, codes, lam).mean()))
        # atoms no code uses at all can be replaced without raising the objective
        unused = np.flatnonzero(np.all(codes == 0, axis=0))
        worst = np.argsort(-errors, kind="stable")
        for j, i in zip(unused, worst):
            norm = np.linalg.norm(X[i])
            if norm > 0:
                atoms[:, j] = X[i] / max(norm, 1.0)
        return codes, errors

    history: List[float] = []
    codes, _ = refresh()
    A = codes.T @ codes
    B = X.T @ codes

    for epoch in tqdm(range(epochs), desc=f"dictionary {motion.label}", disable=not progress_enabled(), leave=False):
        for i in rng.permutation(n):
            # warm start from the image's previous code
            new = sparse_code_batch(X[i], atoms, lam, tol, max_sweeps, init=codes[i])[0][0]
            old = codes[i]
            A += np.outer(new, new) - np.outer(old, old)
            B += np.outer(X[i], new - old)
            codes[i] = new
            for j in range(K):
                if A[j, j] < _UNUSED_ATOM:
                    continue
                u = (B[:, j] - atoms @ A[:, j]) / A[j, j] + atoms[:, j]
                atoms[:, j] = u / max(1.0, float(np.linalg.norm(u)))

        codes, _ = refresh(codes)
        A = codes.T @ codes
        B = X.T @ codes
        logger.debug(f"dictionary {motion.label} epoch {epoch + 1}: objective {history[-1]:.6g}")

    return ClassDictionary(motion=motion, atoms=atoms, lam=lam, objective_history=history)


def dictionary_errors(X: np.ndarray, dicts: Sequence[ClassDictionary], tol: float = 1e-8, max_sweeps: int = 1000) -> np.ndarray:
    """reconstruction errors, one column per dictionary"""
    X = np.atleast_2d(X)
    return np.column_stack([sparse_code_batch(X, d.atoms, d.lam, tol, max_sweeps)[1] for d in dicts])


def _pick(errors: np.ndarray, dicts: Sequence[ClassDictionary]) -> Tuple[MotionClass, List[int]]:
    best = errors.min()
    # dicts are in class-code order, so the first tying entry has the lowest code
    winner = dicts[int(np.flatnonzero(errors <= best + _TIE)[0])].motion
    one_hot = [0] * len(MotionClass)
    one_hot[int(winner)] = 1
    return winner, one_hot


def sort_dictionaries(dicts: Sequence[ClassDictionary]) -> List[ClassDictionary]:
    ordered = sorted(dicts, key=lambda d: int(d.motion))
    if not ordered:
        raise PreconditionError("no class dictionaries")
    if len({d.P for d in ordered}) != 1:
        raise PreconditionError("class dictionaries were trained on different image lengths")
    return ordered


def dictionary_predict(x: np.ndarray, dicts: Sequence[ClassDictionary]) -> Tuple[MotionClass, List[int]]:
    ordered = sort_dictionaries(dicts)
    return _pick(dictionary_errors(x, ordered)[0], ordered)


def dictionary_predict_batch(X: np.ndarray, dicts: Sequence[ClassDictionary]) -> Tuple[List[MotionClass], np.ndarray, np.ndarray]:
    """returns (classes, one-hot matrix n x 6, errors n x len(dicts)) with dicts in class-code order"""
    ordered = sort_dictionaries(dicts)
    errors = dictionary_errors(X, ordered)
    picks = [_pick(row, ordered) for row in errors]
    return [c for c, _ in picks], np.array([h for _, h in picks], dtype=float).reshape(len(picks), len(MotionClass)), errors
