"""Fit the model by quasi maximum likelihood on simulated lattice data."""
from spegarch import MODEL_A, FitOptions, fit_qmle, simulate
from spegarch.mc import lattice_weights

w1, w2 = lattice_weights(4, 4)
y = simulate(MODEL_A, w1, w2, t_len=200, seed=11).y

res = fit_qmle(y, w1, w2, opts=FitOptions(n_starts=20, seed=1))
truth = MODEL_A.to_dict()
print(f"loglik {res.loglik:.2f}  AIC {res.aic:.2f}  converged {res.converged}")
est = res.params.to_dict()
ses = res.std_errors if res.std_errors is not None else [float("nan")] * len(res.names)
for name, se in zip(res.names, ses):
    print(f"{name:>8s}  true {truth[name]: .3f}  estimate {est[name]: .3f}  se {se:.3f}")
