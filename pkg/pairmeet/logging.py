import logging

logger = None
_handlers = []

_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}


def get_logger():
    global logger
    return logger


def write_log(s, level="info"):
    global logger
    if logger:
        logger.log(_LEVELS.get(level, logging.INFO), s)


def use_logging(name=None,
                stdout=True,
                fout=False,
                fpath=None,
                fmt=None,
                mode='a',
                level="info"):

    global logger

    if not name:
        name = "pairmeet"

    if not logger:
        # Create logger
        logger = logging.getLogger(name)

        # Formatting
        if not fmt:
            fmt = "[%(asctime)s] %(levelname)s %(message)s"
        formatter = logging.Formatter(fmt, "%Y-%m-%d %H:%M:%S")

        # Standard output
        if stdout:
            stream_handler = logging.StreamHandler()
            stream_handler.setFormatter(formatter)
            logger.addHandler(stream_handler)
            _handlers.append(stream_handler)

        # File output
        if fout:
            if not fpath:
                fpath = "%s.log"%(name)
            file_handler = logging.FileHandler(fpath, mode=mode)
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)
            _handlers.append(file_handler)

        if not _handlers:
            null_handler = logging.NullHandler()
            logger.addHandler(null_handler)
            _handlers.append(null_handler)
        logger.propagate = False

        logger.setLevel(_LEVELS.get(level, logging.INFO))
    return logger


def finish_logging():

    global logger

    if not logger:
        return

    for handler in _handlers:
        handler.close()
        logger.removeHandler(handler)
    _handlers.clear()
    logger = None
