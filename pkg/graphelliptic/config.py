from pydantic import BaseModel
from pydantic_settings import BaseSettings, SettingsConfigDict


class Tolerances(BaseModel):
    # Identities (Green, stiffness consistency, embedding slack)
    identity: float = 1e-12
    eigen_residual: float = 1e-10

    # Solver acceptance
    solution_residual: float = 1e-10
    distinct: float = 1e-6
    trivial: float = 1e-12
    positivity: float = 1e-10
    ball_margin: float = 1e-8

    # Newton / deflation
    deflation_tau: float = 1e-8
    newton_singular: float = 1e-10
    levenberg_shift: float = 1e-8

    # Higher order
    p_regularization: float = 1e-10
    lambda_mp_agreement: float = 1e-9
    lambda_mp_quotient_change: float = 1e-13

    # One-dimensional searches
    golden: float = 1e-8
    potential_extremum: float = 1e-10


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="GRAPHELLIPTIC_",
        env_file=".env",
        env_nested_delimiter="__",
        extra="ignore",
    )

    # Execution
    threads: int = 4
    restart_batch: int = 8

    # Logging
    log_level: str = "WARNING"
    log_json: bool = False

    # Spectral
    dense_eigen_limit: int = 512
    lambda_mp_restarts: int = 16
    inverse_power_iterations: int = 500

    # Solvers
    default_seed: int = 0
    default_budget: int = 64
    max_newton_iterations: int = 100
    max_descent_iterations: int = 20000
    default_start_radius: float = 10.0
    deflation_shift: float = 1.0

    tolerances: Tolerances = Tolerances()


settings = Settings()
