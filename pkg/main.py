import logging
import os
import sys

import hydra
from hydra.utils import to_absolute_path
from omegaconf import DictConfig

from src.errors import MLMError
from src.pipeline import run_command, validate_config

logger = logging.getLogger(__name__)


def resolve_paths(config: DictConfig):
    """Make the input paths absolute, Hydra changes the working directory."""
    exp = config.exp
    paths = [
        (exp.data, "path"),
        (exp.data, "test_path"),
        (exp.interpret, "model_path"),
        (exp.predict, "model_path"),
        (exp.predict, "input_path"),
        (exp.evaluate, "model_path"),
        (exp.evaluate, "input_path"),
        (exp.generate, "output"),
    ]
    for section, key in paths:
        if section[key] is not None:
            section[key] = to_absolute_path(section[key])


@hydra.main(version_base="1.3", config_path="configs", config_name="default")
def main(config: DictConfig):
    logging.getLogger().setLevel(os.environ.get("MLM_LOG_LEVEL", "INFO").upper())

    try:
        validate_config(config)
        resolve_paths(config)
        run_command(config)
    except MLMError as error:
        logger.error(str(error))
        sys.exit(error.exit_code)


if __name__ == "__main__":
    # Launch with hydra.
    main()
