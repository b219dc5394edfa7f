import logging
import os
from datetime import datetime

from jacobi_anosov.config import settings


def get_logger(name=__name__):
    # Configure root logger only once
    if not logging.getLogger().handlers:
        log_format = "%(asctime)-29s%(levelname)-10s%(name)-40s%(message)s"

        handlers = [logging.StreamHandler()]  # stderr; stdout stays clean
        if settings.LOG_DIR:
            os.makedirs(settings.LOG_DIR, exist_ok=True)
            log_file = os.path.join(settings.LOG_DIR, f"{datetime.now():%Y-%m-%d}.log")
            handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

        logging.basicConfig(
            level=logging.INFO,
            format=log_format,
            handlers=handlers,
        )

    return logging.getLogger(name)
