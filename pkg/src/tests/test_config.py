import unittest
import os
import json
import copy

from config import RunConfig, ConfigError, COMMANDS, parse_config
from config.config import (
    ContactConnectionBlock,
    RandomConnectionBlock,
    SingularityBlock,
    ShiftBlock,
)

from data_fields import TEST_CONFIG_DICT, SMALL_GRID


class TestConfig(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        """Create a temporary configuration file for testing."""
        cls.test_config_path = os.path.join(os.path.dirname(__file__), 'test_config.json')
        with open(cls.test_config_path, 'w') as f:
            json.dump(TEST_CONFIG_DICT, f)

    @classmethod
    def tearDownClass(cls):
        """Remove the temporary configuration file after tests."""
        if os.path.isfile(cls.test_config_path):
            os.remove(cls.test_config_path)

    def test_load_config_from_dict(self):
        config = RunConfig.from_dict(TEST_CONFIG_DICT)
        self.assertIsInstance(config, RunConfig)

    def test_load_config_from_json(self):
        config = parse_config(self.test_config_path)

        self.assertEqual(config.command, "shift-C")
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.geometry.k, SMALL_GRID["k"])
        self.assertEqual(config.geometry.n_z, SMALL_GRID["n_z"])

        self.assertEqual(len(config.singularities), 1)
        singularity = config.singularities[0]
        self.assertIsInstance(singularity, SingularityBlock)
        self.assertEqual(singularity.weights, [1, -1])
        self.assertEqual(singularity.z, [0.3, -0.2])

        self.assertIsInstance(config.connection, ContactConnectionBlock)
        self.assertEqual(config.connection.rank, 2)
        self.assertEqual(config.triple.G, "z+5")
        self.assertEqual(config.spectral.matrix, [["0", "1"], ["z", "0"]])

    def test_defaults(self):
        config = RunConfig.from_dict({})
        self.assertIsNone(config.command)
        self.assertIsNone(config.connection)
        self.assertEqual(config.geometry.k, 1)
        self.assertEqual(config.geometry.n_z, 32)
        self.assertEqual(config.flow.tol, 1e-5)
        self.assertEqual(config.flow.max_iter, 10000)
        self.assertEqual(config.flow.scheme, 'implicit')
        self.assertEqual(config.output_dir, 'output')

    def test_connection_discriminator(self):
        config = RunConfig.from_dict({"connection": {"kind": "random", "rank": 2, "metrics": 3}})
        self.assertIsInstance(config.connection, RandomConnectionBlock)
        self.assertEqual(config.connection.metrics, 3)

        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"connection": {"kind": "spiral"}})

    def test_unknown_key_is_rejected(self):
        data = copy.deepcopy(TEST_CONFIG_DICT)
        data["geometry"]["nz"] = 12
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_dict(data)
        self.assertTrue(any(error.startswith("geometry.nz") for error in context.exception.errors))

    def test_negative_bundle_degree(self):
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_dict({"geometry": {"k": -1}})
        self.assertTrue(any(error.startswith("geometry.k") for error in context.exception.errors))

    def test_grid_too_small(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"geometry": {"n_z": 4}})

    def test_weights_must_be_nonincreasing(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"singularities": [{"weights": [-1, 1]}]})

    def test_point_needs_two_parts(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"triple": {"base_point": [0.0, 1.0, 2.0]}})

    def test_shift_lengths_must_agree(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"shift": {"weights": [[1], [2]], "t": [0.5]}})
        block = ShiftBlock(weights=[[1], [2]], t=[0.5, 0.25])
        self.assertEqual(len(block.t), 2)

    def test_unknown_command(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"command": "plot"})
        for command in COMMANDS:
            self.assertEqual(RunConfig.from_dict({"command": command}).command, command)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            parse_config("does-not-exist.json")

    def test_not_an_object(self):
        path = os.path.join(os.path.dirname(__file__), 'test_config_list.json')
        with open(path, 'w') as f:
            json.dump([1, 2, 3], f)
        try:
            with self.assertRaises(ConfigError):
                parse_config(path)
        finally:
            os.remove(path)


if __name__ == '__main__':
    unittest.main()
