import unittest
import os
import json
import tempfile

import numpy as np
import pandas as pd

from report_handlers import CommandResult, LocalReportWriter, config_hash, emit_report, to_jsonable


class TestToJsonable(unittest.TestCase):

    def test_numpy_values(self):
        self.assertEqual(to_jsonable(np.array([1.5, 2.0])), [1.5, 2.0])
        self.assertEqual(to_jsonable(np.float64(0.25)), 0.25)
        self.assertEqual(to_jsonable({1: (2, 3)}), {'1': [2, 3]})

    def test_special_numbers(self):
        self.assertEqual(to_jsonable(1 + 2j), {'re': 1.0, 'im': 2.0})
        self.assertIsNone(to_jsonable(float('nan')))
        self.assertEqual(to_jsonable([float('inf'), float('-inf')]), ['inf', '-inf'])


class TestLocalReportWriter(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.folder = os.path.join(self.directory.name, 'out')
        self.writer = LocalReportWriter(self.folder)
        self.writer.connect()

    def tearDown(self):
        self.directory.cleanup()

    def test_connect_creates_folder(self):
        self.assertTrue(os.path.isdir(self.folder))

    def test_tables_are_numbered(self):
        first = self.writer.write_table('refinement', [{'n_z': 16, 'residual': 0.1}])
        second = self.writer.write_table('history', [{'iteration': 0, 'residual': 1.0}])
        self.assertEqual(os.path.basename(first), '001_refinement.csv')
        self.assertEqual(os.path.basename(second), '002_history.csv')
        frame = pd.read_csv(first)
        self.assertEqual(list(frame.columns), ['n_z', 'residual'])

    def test_report_keys_are_sorted(self):
        path = self.writer.write_report({'b': 1, 'a': {'d': 2, 'c': 3}})
        with open(path) as handle:
            text = handle.read()
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertLess(text.index('"c"'), text.index('"d"'))

    def test_stream_appends_lines(self):
        for iteration in range(3):
            path = self.writer.append_record('flow_0', {'iteration': iteration, 'residual': 0.5 ** iteration})
        with open(path) as handle:
            records = [json.loads(line) for line in handle]
        self.assertEqual(os.path.basename(path), 'flow_0.jsonl')
        self.assertEqual([record['iteration'] for record in records], [0, 1, 2])

    def test_new_writer_restarts_a_stream(self):
        self.writer.append_record('flow_0', {'iteration': 0})
        path = LocalReportWriter(self.folder).append_record('flow_0', {'iteration': 5})
        with open(path) as handle:
            self.assertEqual(len(handle.readlines()), 1)

    def test_document(self):
        path = self.writer.write_document('connection', {'rank': 1, 'value': 1j})
        with open(path) as handle:
            self.assertEqual(json.load(handle), {'rank': 1, 'value': {'re': 0.0, 'im': 1.0}})


class TestEmitReport(unittest.TestCase):

    def test_report_and_manifest(self):
        result = CommandResult('shift-C')
        result.check('shift is finite', 0.5, True)
        result.results['delta_C'] = 0.5
        result.tables['points'] = [{'re': 0.0, 'im': 0.0}]
        configuration = {'command': 'shift-C', 'seed': 0}
        with tempfile.TemporaryDirectory() as directory:
            path = emit_report(result, directory, configuration, {'numpy': np.__version__})
            with open(path) as handle:
                report = json.load(handle)
            with open(os.path.join(directory, 'manifest.json')) as handle:
                manifest = json.load(handle)
            self.assertTrue(os.path.isfile(os.path.join(directory, '001_points.csv')))
        self.assertTrue(report['passed'])
        self.assertEqual(report['config_hash'], config_hash(configuration))
        self.assertNotIn('created_utc', report)
        self.assertEqual(manifest['artifacts'], ['001_points.csv'])
        self.assertIn('created_utc', manifest)

    def test_buffered_streams_and_documents(self):
        result = CommandResult('flow')
        result.stream('flow_0', {'iteration': 0, 'residual': 1.0})
        result.stream('flow_0', {'iteration': 1, 'residual': 0.5})
        result.documents['flow_0_connection'] = {'rank': 1}
        with tempfile.TemporaryDirectory() as directory:
            emit_report(result, directory, {}, {})
            with open(os.path.join(directory, 'flow_0.jsonl')) as handle:
                lines = handle.readlines()
            with open(os.path.join(directory, 'manifest.json')) as handle:
                manifest = json.load(handle)
            self.assertTrue(os.path.isfile(os.path.join(directory, 'flow_0_connection.json')))
        self.assertEqual(len(lines), 2)
        self.assertEqual(manifest['artifacts'], ['flow_0_connection.json', 'flow_0.jsonl'])

    def test_attached_writer_streams_immediately(self):
        with tempfile.TemporaryDirectory() as directory:
            writer = LocalReportWriter(directory)
            writer.connect()
            result = CommandResult('flow', writer=writer)
            result.stream('flow_0', {'iteration': 0})
            self.assertTrue(os.path.isfile(os.path.join(directory, 'flow_0.jsonl')))
            self.assertEqual(result.streams['flow_0'], [])
            emit_report(result, directory, {}, {})
            with open(os.path.join(directory, 'flow_0.jsonl')) as handle:
                self.assertEqual(len(handle.readlines()), 1)

    def test_empty_result(self):
        with tempfile.TemporaryDirectory() as directory:
            path = emit_report(CommandResult('degree'), directory, {}, {})
            with open(path) as handle:
                report = json.load(handle)
        self.assertEqual(report['checks'], [])
        self.assertTrue(report['passed'])

    def test_failed_check(self):
        result = CommandResult('degree')
        result.check('degree matches', 1.0, True)
        result.check('gauge invariant', 0.3, False)
        self.assertFalse(result.passed)

    def test_config_hash_ignores_key_order(self):
        self.assertEqual(config_hash({'a': 1, 'b': [1, 2]}), config_hash({'b': [1, 2], 'a': 1}))
        self.assertNotEqual(config_hash({'a': 1}), config_hash({'a': 2}))


if __name__ == '__main__':
    unittest.main()
