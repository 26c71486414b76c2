from ..data import validate_dataset
from ..frailty import FrailtyModel, SimConfig, calibrate_nu, simulate_dataset


def gamma_model(kendall_tau=0.5, event_rate=0.6, censor_lo=40.0):
    model = FrailtyModel(kendall_tau=kendall_tau)
    return model.with_(nu=calibrate_nu(model, event_rate), censor_lo=censor_lo)


def simulated(n1=150, J=2, a=1, seed=1, model=None):
    if model is None:
        model = gamma_model()
    return simulate_dataset(SimConfig(model=model, n1=n1, a=a, J=J, seed=seed))


def tiny():
    return validate_dataset([
        ("a", "P", 64.0, 1),
        ("a", "R", 50.0, 0),
        ("a", "R", 93.0, 1),
        ("b", "P", 60.0, 0),
        ("b", "R", 70.0, 1)
    ])
