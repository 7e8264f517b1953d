# /utils/errors.py
# Application errors. Each carries the process exit code main.py returns for it.
from dataclasses import dataclass


@dataclass
class AppError(Exception):
    exit_code: int
    message: str

    def __str__(self) -> str:
        return self.message


def usage_error(msg: str) -> AppError:
    return AppError(1, msg)


def data_error(msg: str) -> AppError:
    return AppError(2, msg)


def io_error(msg: str) -> AppError:
    return AppError(3, msg)
