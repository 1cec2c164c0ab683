import importlib
import pkgutil

from .base import BasePreset

for (module_loader, name, ispkg) in pkgutil.iter_modules(__path__):
    importlib.import_module('.' + name, __package__)


def _named_subclasses(cls):
    for subclass in cls.__subclasses__():
        yield from _named_subclasses(subclass)
        if subclass.name:
            yield subclass


all_presets = {cls.name: cls for cls in _named_subclasses(BasePreset)}
