import copy

import pytest

from btes.assembly import assemble_system
from btes.config import default_config, parse_config


@pytest.fixture(scope="session")
def paper_config():
    return default_config()


@pytest.fixture(scope="session")
def paper_system(paper_config):
    return assemble_system(paper_config)


def make_config(*, size=5.0, edge=1.0, bhe=((2.5, 2.5),), sigma=1, substeps=1, v=(0.0, 0.0),
                source="cell", H=5, constrained="all"):
    """Small uniform-mesh variant of the paper setup."""
    data = copy.deepcopy(default_config().model_dump(by_alias=True))
    data["mesh"].update(domain_size_x=size, domain_size_y=size, fine_edge=edge, coarse_edge=edge,
                        fine_region=None, bhe_positions=[list(p) for p in bhe])
    data["bhe"].update(sigma=sigma, substeps=substeps)
    data["ground"].update(v_x=v[0], v_y=v[1], bhe_source=source)
    data["ocp"].update(H=H, constrained_states=constrained)
    return parse_config(data)
