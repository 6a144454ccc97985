"""
Configuration management module.

This module loads run configurations from YAML files, applies environment
overrides (optionally from a .env file) and validates the result into a
RunConfig.
"""

import logging
import os
from pathlib import Path
from typing import Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from src.errors import ConfigError
from src.models import RunConfig

logger = logging.getLogger(__name__)

ENV_LOG_LEVEL = "MTF_LOG_LEVEL"
ENV_OUTPUT_DIR = "MTF_OUTPUT_DIR"
ENV_MAX_WORKERS = "MTF_MAX_WORKERS"


def get_project_root() -> Path:
    """
    Get the project root directory.

    Returns:
        Path: Path to the project root directory
    """
    return Path(__file__).parent.parent


def _load_environment(env_file: Optional[str]) -> None:
    if env_file:
        load_dotenv(env_file)
        logger.debug(f"Loaded environment variables from {env_file}")
        return
    env_path = get_project_root() / ".env"
    if env_path.exists():
        load_dotenv(env_path)
        logger.debug(f"Loaded environment variables from {env_path}")


def _format_validation_error(error: ValidationError) -> str:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item.get("loc", ()))
        message = item.get("msg", "invalid value").removeprefix("Value error, ")
        messages.append(f"{location}: {message}" if location else message)
    return "; ".join(messages)


def parse_config(data: dict, command: Optional[str] = None) -> RunConfig:
    """
    Validate a configuration mapping, applying environment overrides.

    A command given on the command line replaces the one in the file.

    Raises:
        ConfigError: With one diagnostic per rejected condition
    """
    if not isinstance(data, dict):
        raise ConfigError("Configuration must be a mapping of sections")
    data = dict(data)
    if command:
        if data.get("command") not in (None, command):
            logger.warning(f"Config names command '{data['command']}'; running '{command}' instead")
        data["command"] = command

    # The top-level confinement also shapes the physical parameter block
    if isinstance(data.get("physical"), dict) and "confinement" in data:
        physical = dict(data["physical"])
        physical.setdefault("confinement", data["confinement"])
        data["physical"] = physical

    log_level = os.getenv(ENV_LOG_LEVEL)
    if log_level:
        data["logging"] = {**(data.get("logging") or {}), "level": log_level}
    output_dir = os.getenv(ENV_OUTPUT_DIR)
    if output_dir:
        data["output"] = {**(data.get("output") or {}), "dir": output_dir}
    max_workers = os.getenv(ENV_MAX_WORKERS)
    if max_workers:
        data["scan"] = {**(data.get("scan") or {}), "max_workers": max_workers}

    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {_format_validation_error(e)}") from None


def load_config(path: str, env_file: Optional[str] = None, command: Optional[str] = None) -> RunConfig:
    """
    Load a run configuration from a YAML file.

    Args:
        path: Path to the YAML configuration
        env_file: Optional path to a .env file. If None, looks for .env in project root
        command: Command overriding the one in the file

    Returns:
        RunConfig: Validated configuration

    Raises:
        ConfigError: If the file is missing, unparsable or invalid
    """
    _load_environment(env_file)

    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Configuration file not found: {config_path}")
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Could not parse {config_path}: {e}") from None

    config = parse_config(data or {}, command=command)
    logger.debug(f"Configuration loaded from {config_path} (command: {config.command})")
    return config


def ensure_output_directory(config: RunConfig) -> Path:
    """
    Ensure the output directory exists and is writable.

    Returns:
        Path: Path to the output directory

    Raises:
        ConfigError: If the directory cannot be created or written to
    """
    output_path = Path(config.output.dir)
    if not output_path.is_absolute():
        output_path = Path.cwd() / output_path
    try:
        output_path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Output directory {output_path} is not writable: {e}") from None
    if not os.access(output_path, os.W_OK):
        raise ConfigError(f"Output directory {output_path} is not writable")
    logger.debug(f"Output directory ensured at {output_path}")
    return output_path
