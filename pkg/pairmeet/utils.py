import os
from os.path import join as pjoin
from numbers import Integral, Real

import numpy as np
import yaml

from pairmeet.logging import write_log
from pairmeet.exception import InvalidParameterError

_settings = None


def get_package_path():
    return os.path.abspath(os.path.dirname(__file__))


def load_settings(fname: str = "settings.yml"):
    dpath_config = pjoin(get_package_path(), "config")
    fpath_config = pjoin(dpath_config, fname)

    with open(fpath_config, "rt") as fin:
        return yaml.safe_load(fin.read())


def get_setting(section: str, key: str):
    """Look up a numeric policy constant from the packaged settings file."""
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings[section.upper()][key.upper()]


def check_type(varname, obj, wtype, allow_none=False):
    """Check object for a wanted type.

    Parameters
    ----------
    varname : str
        Variable name.
    obj : Object
        Object to be checked.
    wtype : Type
        Wanted Type.

    Raises
    ------
    TypeError

    """
    if allow_none and obj is None:
        return

    if not isinstance(obj, wtype):
        err_msg = "%s should be %s type, not %s"%(varname, wtype, type(obj))
        write_log(err_msg, "error")
        raise TypeError(err_msg)


def check_nonnegative_int(varname, val):
    if not isinstance(val, Integral) or isinstance(val, bool):
        err_msg = "%s should be int type."%(varname)
        write_log(err_msg, "error")
        raise InvalidParameterError(varname, val, err_msg)

    if val < 0:
        err_msg = "%s cannot be negative."%(varname)
        write_log(err_msg, "error")
        raise InvalidParameterError(varname, val, err_msg)


def check_seed(varname, val):
    """Any 64-bit integer, signed or unsigned."""
    if not isinstance(val, Integral) or isinstance(val, bool):
        err_msg = "%s should be int type."%(varname)
        write_log(err_msg, "error")
        raise InvalidParameterError(varname, val, err_msg)

    if not -(1 << 63) <= val < (1 << 64):
        err_msg = "%s=%d does not fit in 64 bits."%(varname, val)
        write_log(err_msg, "error")
        raise InvalidParameterError(varname, val, err_msg)


def check_positive_int(varname, val):
    check_nonnegative_int(varname, val)
    if val == 0:
        err_msg = "%s should be positive."%(varname)
        write_log(err_msg, "error")
        raise InvalidParameterError(varname, val, err_msg)


def check_positive_float(varname, val):
    if not isinstance(val, Real) or isinstance(val, bool):
        err_msg = "%s should be float type."%(varname)
        write_log(err_msg, "error")
        raise InvalidParameterError(varname, val, err_msg)

    if not np.isfinite(val) or val <= 0.:
        err_msg = "%s should be a positive finite number, not %s."%(varname,
                                                                     val)
        write_log(err_msg, "error")
        raise InvalidParameterError(varname, val, err_msg)


def check_probability(varname, val):
    if not isinstance(val, Real) or isinstance(val, bool):
        err_msg = "%s should be float type."%(varname)
        write_log(err_msg, "error")
        raise InvalidParameterError(varname, val, err_msg)

    if not 0. <= val <= 1.:
        err_msg = "%s should lie in [0, 1], not %s."%(varname, val)
        write_log(err_msg, "error")
        raise InvalidParameterError(varname, val, err_msg)


def seed_sequence(seed: int):
    """Map any 64-bit integer (signed or not) onto a numpy SeedSequence."""
    return np.random.SeedSequence(int(seed) % (1 << 64))


def make_rng(seed: int):
    return np.random.Generator(np.random.PCG64(seed_sequence(seed)))


def spawn_seeds(master_seed: int, count: int):
    """Derive `count` independent 64-bit seeds from a master seed.

    The derivation depends only on (master_seed, count index), so the i-th
    seed is stable no matter how many are requested after it.
    """
    check_nonnegative_int("count", count)
    children = seed_sequence(master_seed).spawn(count)
    return [int(child.generate_state(1, np.uint64)[0]) for child in children]
