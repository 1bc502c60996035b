from src.psmodel.params import JointParams, PrincipalStratum

# large violation of principal ignorability in the treated arm, none in the control arm
SETTING_5 = JointParams(
    beta0=(11.5, 0.0),
    beta1=(11.5, 96.0),
    lambda0=-0.5,
    lambda1=-0.5,
    sigma_y2=14.0**2,
    phi0=0.89,
    phi1=0.70,
    sigma_s0=0.25,
    sigma_s1=0.25,
    rho=0.75,
)

SETTING_5_STRATA = (
    PrincipalStratum(0.89, 0.18),
    PrincipalStratum(0.89, 0.35),
    PrincipalStratum(0.89, 0.52),
)

# satisfies beta01 = 0 and beta00 = beta10, so rho is identified
SETTING_RHO_IDENT = JointParams(
    beta0=(1.2, 0.0),
    beta1=(1.2, 1.2),
    lambda0=0.9,
    lambda1=0.5,
    sigma_y2=0.5**2,
    phi0=0.3,
    phi1=0.5,
    sigma_s0=1.0,
    sigma_s1=1.0,
    rho=0.75,
)

# principal ignorability holds
SETTING_PI = SETTING_RHO_IDENT.replace(beta1=(0.0, 1.2))

PRESETS = {
    "setting5": SETTING_5,
    "rho_ident": SETTING_RHO_IDENT,
    "pi": SETTING_PI,
}
