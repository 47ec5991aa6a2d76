from contextlib import contextmanager
from typing import Iterator

from ..errors import MLMError


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag the pipeline errors raised inside the block with the stage name.

    Errors already tagged by an inner stage keep their tag.
    """
    try:
        yield
    except MLMError as error:
        if error.stage is None:
            error.stage = name
        raise
