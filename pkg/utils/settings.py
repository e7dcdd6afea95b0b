import os
from dataclasses import dataclass, replace

from dotenv import load_dotenv

DEFAULT_FIXTURES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "fixtures")


@dataclass(frozen=True)
class Settings:
    fixtures_dir: str = DEFAULT_FIXTURES
    tol: float = 1e-9
    pf_tol: float = 1e-10
    pf_max_iter: int = 100_000
    level_cap: int = 6
    dim_cap: int = 20_000
    seed: int = 0

    @classmethod
    def from_env(cls, dotenv_path=None):
        """Defaults overridden by BICONNECT_* variables (a .env file is read first)"""
        load_dotenv(dotenv_path)
        base = cls()
        return replace(
            base,
            fixtures_dir=os.getenv("BICONNECT_FIXTURES", base.fixtures_dir),
            tol=float(os.getenv("BICONNECT_TOL", base.tol)),
            pf_max_iter=int(os.getenv("BICONNECT_PF_MAX_ITER", base.pf_max_iter)),
            level_cap=int(os.getenv("BICONNECT_LEVEL_CAP", base.level_cap)),
            dim_cap=int(os.getenv("BICONNECT_DIM_CAP", base.dim_cap)),
            seed=int(os.getenv("BICONNECT_SEED", base.seed)),
        )


DEFAULTS = Settings()
