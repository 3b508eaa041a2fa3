import unittest
import pandas as pd
import numpy as np
import os
import json
import tempfile
import shutil
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.errors import InvalidParamsError
from src.core.kepler_slice import SliceCurve
from src.core.result_storage import ResultStorage, render_csv, render_json, render_slice_figure


class TestResultStorage(unittest.TestCase):
    """
    Test cases for the ResultStorage class.
    """

    def setUp(self):
        """
        Set up test fixtures.
        """
        self.df = pd.DataFrame({
            'c': [1.8, 1.8, 2.5],
            'mu': [0.5, 0.9999, 0.9999],
            'lambda_min': [np.nan, 0.123456789012345678, 1.0 / 3.0],
            'verdict': ['Degenerate', 'NumericallyConvex', 'NumericallyConvex'],
        })
        self.config = {'command': 'scan', 'resolution': [4, 8, 4, 2]}

        self.temp_dir = tempfile.mkdtemp()
        self.output_dir = os.path.join(self.temp_dir, 'results')
        self.memory_storage = ResultStorage(storage_type='memory')
        self.file_storage = ResultStorage(storage_type='file', output_dir=self.output_dir)

    def tearDown(self):
        """
        Clean up test fixtures.
        """
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_memory_storage(self):
        """
        Test in-memory storage of tables and documents.
        """
        self.assertIsNone(self.memory_storage.store_table('scan', self.df, config=self.config))
        self.assertIsNone(self.memory_storage.store_json('certificate', {'verdict': 'NumericallyConvex'}))

        self.assertTrue(self.memory_storage.tables['scan'].equals(self.df))
        self.assertEqual(self.memory_storage.documents['certificate'], {'verdict': 'NumericallyConvex'})
        self.assertEqual(self.memory_storage.list_results(), ['certificate', 'scan'])
        self.assertEqual(self.memory_storage.get_metadata('scan')['row_count'], 3)
        self.assertFalse(os.path.exists(self.output_dir))

    def test_file_storage(self):
        """
        Test CSV and JSON output with metadata sidecars.
        """
        path = self.file_storage.store_table('scan', self.df, config=self.config)
        self.assertTrue(os.path.exists(path))
        with open(path, 'r', encoding='utf-8') as f:
            self.assertEqual(f.read(), render_csv(self.df))

        metadata_path = os.path.join(self.output_dir, 'scan_metadata.json')
        with open(metadata_path, 'r', encoding='utf-8') as f:
            metadata = json.load(f)
        self.assertEqual(metadata['config'], self.config)
        self.assertEqual(metadata['columns'], ['c', 'mu', 'lambda_min', 'verdict'])
        self.assertNotIn('timestamp', metadata)

        json_path = self.file_storage.store_json('certificate', {'lambda_min': 0.25})
        with open(json_path, 'r', encoding='utf-8') as f:
            self.assertEqual(json.load(f), {'lambda_min': 0.25})

    def test_get_metadata_from_disk(self):
        """
        Test that a fresh storage object reads metadata written earlier.
        """
        self.file_storage.store_table('scan', self.df, config=self.config)
        reopened = ResultStorage(storage_type='file', output_dir=self.output_dir)
        self.assertEqual(reopened.get_metadata('scan')['kind'], 'table')
        self.assertEqual(reopened.get_metadata('missing'), {})

    def test_csv_format(self):
        """
        Test the CSV text: header row, 17 significant digits, empty NaN.
        """
        lines = render_csv(self.df).split('\n')
        self.assertEqual(lines[0], 'c,mu,lambda_min,verdict')
        self.assertEqual(lines[1], '1.8,0.5,,Degenerate')
        self.assertEqual(float(lines[2].split(',')[2]), 0.123456789012345678)
        self.assertEqual(lines[-1], '')

    def test_json_rejects_nan(self):
        """
        Test that NaN never reaches a JSON document.
        """
        with self.assertRaises(ValueError):
            render_json({'lambda_min': float('nan')})
        self.assertTrue(render_json({'lambda_min': None}).endswith('}\n'))

    def test_xlsx_round_trip(self):
        """
        Test Excel output through openpyxl.
        """
        path = self.file_storage.store_table('scan', self.df, fmt='xlsx')
        self.assertTrue(path.endswith('.xlsx'))
        loaded = pd.read_excel(path, engine='openpyxl')
        self.assertEqual(list(loaded.columns), list(self.df.columns))
        self.assertEqual(list(loaded['verdict']), list(self.df['verdict']))

    def test_unknown_format(self):
        """
        Test that only csv and xlsx tables are accepted.
        """
        with self.assertRaises(InvalidParamsError):
            self.memory_storage.store_table('scan', self.df, fmt='parquet')
        with self.assertRaises(InvalidParamsError):
            ResultStorage(storage_type='sqlite')

    def test_figure_is_reproducible(self):
        """
        Test that the same figure twice gives identical SVG bytes.
        """
        curve = SliceCurve('K=0', [np.array([[0.0, 1.0], [0.1, 0.9], [0.2, 0.7]])])
        for name in ('first', 'second'):
            figure = render_slice_figure([curve], [(0.1, 0.9)], title='c = 1.601')
            self.memory_storage.store_figure(name, figure)
        first, second = self.memory_storage.figures['first'], self.memory_storage.figures['second']
        self.assertTrue(first.startswith(b'<?xml'))
        self.assertEqual(first, second)

        path = self.file_storage.store_figure('slice', render_slice_figure([curve]))
        with open(path, 'rb') as f:
            self.assertIn(b'<svg', f.read())


if __name__ == '__main__':
    unittest.main()
