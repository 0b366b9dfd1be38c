from typing import Callable, List, Optional, Sequence, TypeVar

from joblib import Parallel, delayed

from .error import raise_on_invalid

T = TypeVar("T")
R = TypeVar("R")

_n_jobs = 1


def enable_parallel_evaluation(n_jobs: int = -1):
    """
    Sets the number of worker threads used to evaluate the individuals of a generation for the
    entire process. ``-1`` uses all processors, ``1`` evaluates serially. Every individual draws its
    samples from its own seed substream, so results are identical for any number of workers. Only
    the wall clock time changes.
    """
    global _n_jobs
    raise_on_invalid(
        isinstance(n_jobs, int) and n_jobs != 0 and n_jobs >= -1,
        f"n_jobs must be a positive count or -1, got {n_jobs}",
    )
    _n_jobs = n_jobs


def ordered_map(
    function: Callable[[T], R], items: Sequence[T], n_jobs: Optional[int] = None
) -> List[R]:
    """
    ``[function(item) for item in items]``, spread over joblib threads. Results keep the order of
    ``items``.
    """
    n_jobs = _n_jobs if n_jobs is None else n_jobs
    if n_jobs == 1 or len(items) < 2:
        return [function(item) for item in items]
    return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(function)(item) for item in items)
