"""
Environment and local preferences for SEC-NoSQL.

Resolves the master key (env var first, then key file), the log level and
the default state directory. Preferences live in an optional settings.ini.
"""

import logging
import os
from configparser import ConfigParser
from pathlib import Path
from typing import Optional

from ..core import ConfigError, KeyDerivationError, MasterKey


class Settings:
    """Manages runtime settings via environment and settings.ini."""

    # Settings file location (project root)
    SETTINGS_FILE = Path(__file__).parent.parent.parent / "settings.ini"

    ENV_MASTER_KEY = "SECNOSQL_MASTER_KEY"
    ENV_LOG_LEVEL = "SECNOSQL_LOG_LEVEL"
    ENV_STATE_DIR = "SECNOSQL_STATE_DIR"

    # Section and keys
    SECTION = "preferences"
    KEY_LOG_LEVEL = "log_level"
    KEY_STATE_DIR = "state_dir"

    DEFAULT_LOG_LEVEL = "INFO"
    DEFAULT_STATE_DIR = ".secnosql"

    def __init__(self, settings_file: Optional[Path] = None, environ: Optional[dict] = None):
        self.settings_file = Path(settings_file) if settings_file else self.SETTINGS_FILE
        self.environ = os.environ if environ is None else environ
        self.config = ConfigParser()
        if self.settings_file.exists():
            self.config.read(self.settings_file)
        if not self.config.has_section(self.SECTION):
            self.config.add_section(self.SECTION)

    def save(self) -> None:
        self.settings_file.parent.mkdir(parents=True, exist_ok=True)
        with open(self.settings_file, "w") as f:
            self.config.write(f)

    # ----- master key -----

    def master_key(self, key_file: Optional[str] = None, required: bool = True) -> Optional[MasterKey]:
        """
        Master key from SECNOSQL_MASTER_KEY (64 hex chars), else from `key_file`.

        Raises ConfigError when required and neither source yields a valid key.
        """
        raw = self.environ.get(self.ENV_MASTER_KEY)
        source = self.ENV_MASTER_KEY
        if not raw and key_file:
            path = Path(key_file)
            if not path.exists():
                raise ConfigError(f"Master key file not found: {path}")
            raw = path.read_text(encoding="ascii").strip()
            source = str(path)
        if not raw:
            if required:
                raise ConfigError(f"No master key: set {self.ENV_MASTER_KEY} or master_key_file")
            return None
        try:
            return MasterKey.from_hex(raw)
        except KeyDerivationError as e:
            raise ConfigError(f"Invalid master key from {source}: {e}") from None

    # ----- preferences -----

    def get_log_level(self) -> int:
        """Log level name from env, then settings.ini, default INFO."""
        name = self.environ.get(self.ENV_LOG_LEVEL) or self.config.get(
            self.SECTION, self.KEY_LOG_LEVEL, fallback=self.DEFAULT_LOG_LEVEL
        )
        level = logging.getLevelName(name.strip().upper())
        return level if isinstance(level, int) else logging.INFO

    def set_log_level(self, name: str) -> None:
        self.config.set(self.SECTION, self.KEY_LOG_LEVEL, name.upper())
        self.save()

    def get_state_dir(self) -> Path:
        value = self.environ.get(self.ENV_STATE_DIR) or self.config.get(
            self.SECTION, self.KEY_STATE_DIR, fallback=self.DEFAULT_STATE_DIR
        )
        return Path(value)

    def set_state_dir(self, path: str) -> None:
        self.config.set(self.SECTION, self.KEY_STATE_DIR, path)
        self.save()
