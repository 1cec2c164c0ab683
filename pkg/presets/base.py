class BasePreset(object):
    """ A named experiment. Subclasses set `name`, `description` and `task`
        and describe their model.
    """
    name = None
    description = None
    task = 'estimate-classical'
    beta_min = 0.0
    beta_max = "inf"
    epsilon = 0.2
    trials = 1
    extra = {}

    def model(self):
        raise NotImplementedError

    def experiment(self):
        document = {
            'model': self.model(),
            'task': self.task,
            'beta_min': self.beta_min,
            'beta_max': self.beta_max,
            'epsilon': self.epsilon,
            'trials': self.trials,
        }
        document.update(self.extra)
        return document
