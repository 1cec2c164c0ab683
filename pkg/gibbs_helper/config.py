import os.path

import yaml

from .errors import ValidationError

CONFIG_PATH = os.environ.get('GIBBSUM_CONFIG', 'config.yml')

DEFAULTS = {
    'ENUMERATION_CAP': 2 ** 22,
    'SIMULATION_CAP': 2 ** 24,
    'WORKERS': 4,
    'LOG_LEVEL': 'WARNING',
}


def load_settings(path=CONFIG_PATH):
    """ Global settings from config.yml, falling back to DEFAULTS for every
        key the file does not set.
    """
    settings = dict(DEFAULTS)
    if os.path.exists(path):
        with open(path, "r") as f:
            settings.update(yaml.safe_load(f) or {})
    return settings


def load_document(path):
    """ Reads an experiment, model or schedule file. JSON is a subset of
        YAML so both formats go through the same loader.
    """
    with open(path, "r") as f:
        try:
            return yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ValidationError(f"cannot parse: {e}", str(path))


config = load_settings()
