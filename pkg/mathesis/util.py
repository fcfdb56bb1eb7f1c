# SPDX-License-Identifier: GPL-2.0+
import asyncio
import concurrent.futures
import contextlib
import functools
import inspect
import json
import logging
import time
from typing import Any, Callable, List, Sequence

import numpy as np

from . import config


@contextlib.contextmanager
def log_progress_ctx(level, start_msg, end_msg, *args):
    if inspect.isfunction(start_msg):
        start_msg = start_msg(*args)
    if end_msg is None:
        end_msg = " "

    config.logger.log(level, f"Starting {start_msg}")
    st = time.perf_counter()
    try:
        yield
        et = time.perf_counter()
    except Exception as e:
        if inspect.isfunction(end_msg):
            end_msg = end_msg(*args)
        config.logger.warning(f"FAILED({e!r}): {start_msg}")
        raise

    if inspect.isfunction(end_msg):
        end_msg = end_msg(*args)
    if end_msg.startswith("-"):
        start_msg = ""
    config.logger.log(level,
                      f"Completed {start_msg}{end_msg} (took {et-st:.4f} secs)")


def log_progress(start_msg, end_msg=None, level=logging.INFO):
    """Decorator to log the start/end and duration of a method. The message
    callables receive the decorated method's self"""
    def inner(func):
        @functools.wraps(func)
        def wrapper(self, *args, **kwargs):
            with log_progress_ctx(level, start_msg, end_msg, self):
                res = func(self, *args, **kwargs)
            return res

        return wrapper

    return inner


def pj(json_dict):
    print(json.dumps(json_dict, indent=4, sort_keys=True))


def stable_json(obj) -> str:
    """Single line JSON with a stable key order, used for every artifact"""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


async def asyncio_complete(*awo_list):
    """This is like asyncio.gather but it always ensures that the list of
    awaitable objects is completed upon return. For instance if an exception
    is thrown then all the awaitables are canceled"""
    res = await asyncio.gather(*awo_list, return_exceptions=True)
    for I in res:
        if isinstance(I, Exception):
            raise I
    return res


def run_pure_parallel(func: Callable[[Any], Any], items: Sequence[Any],
                      workers: int = 1) -> List[Any]:
    """Evaluate func over items on a worker pool. Results come back in item
    order so callers see the same merge regardless of the worker count. Only
    use this for pure functions."""
    if workers <= 1 or len(items) <= 1:
        return [func(I) for I in items]

    async def run_all():
        loop = asyncio.get_event_loop()
        with concurrent.futures.ThreadPoolExecutor(
                max_workers=workers) as pool:
            return await asyncio_complete(
                *(loop.run_in_executor(pool, func, I) for I in items))

    loop = asyncio.new_event_loop()
    try:
        return list(loop.run_until_complete(run_all()))
    finally:
        loop.close()


COMPONENTS = {"init": 0, "rollout": 1, "eval": 2, "search": 3, "mutation": 4}


def component_rng(seed: int, component: str, *keys: int):
    """Independent generator for one component of a run, ie the rollout of
    episode 17. Streams depend only on (seed, component, keys)."""
    return np.random.default_rng([seed, COMPONENTS[component], *keys])
