import numpy as np

from amlab.rng import as_generator, replica_seeds, splitmix64, stream_seed


def test_splitmix64_reference_values():
    # first outputs of the reference SplitMix64 generator started from state 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_stream_seed_definition():
    assert stream_seed(42, 3) == splitmix64(42 ^ splitmix64(3))
    seeds = replica_seeds(7, 1000)
    assert len(set(seeds)) == 1000
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_as_generator():
    g, seed = as_generator(11)
    assert seed == 11
    assert g.random() == np.random.default_rng(11).random()
    gen = np.random.default_rng(0)
    assert as_generator(gen)[0] is gen
