import json
import logging
import os
from io import BytesIO
from typing import Any, Dict, List, Optional, Sequence, Tuple

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd

from config import settings
from src.core.errors import InvalidParamsError

logger = logging.getLogger(__name__)

TABLE_FORMATS = ('csv', 'xlsx')


def render_csv(df: pd.DataFrame) -> str:
    """CSV text with a header row, '.' decimals and 17 significant digits."""
    return df.to_csv(index=False, float_format=settings.FLOAT_FORMAT, lineterminator='\n')


def render_json(payload: Dict[str, Any]) -> str:
    """UTF-8 JSON text; keys keep their insertion order."""
    return json.dumps(payload, indent=2, ensure_ascii=False, allow_nan=False) + '\n'


def render_slice_figure(curves, intersections: Sequence[Tuple[float, float]] = (),
                        bbox=settings.SLICE_DEFAULT_BBOX, title: Optional[str] = None):
    """
    Plot slice curves in the (v1, u2) plane.

    Args:
        curves: SliceCurve values; the first is drawn solid, the rest dashed
        intersections: Points marked on top of the curves
        bbox: (v1_min, v1_max, u2_min, u2_max) axis limits
        title: Figure title

    Returns:
        matplotlib.figure.Figure
    """
    styles = [{'color': '#1f4e9c', 'linestyle': '-'}, {'color': '#b22222', 'linestyle': '--'}]
    figure, axes = plt.subplots(figsize=(6, 6))
    for index, curve in enumerate(curves):
        style = styles[index % len(styles)]
        for k, polyline in enumerate(curve.polylines):
            axes.plot(polyline[:, 0], polyline[:, 1], linewidth=1.2,
                      label=curve.curve_id if k == 0 else None, **style)
    if len(intersections):
        xs, ys = zip(*intersections)
        axes.plot(xs, ys, 'o', color='black', markersize=3, label='intersection')
    axes.set_xlim(bbox[0], bbox[1])
    axes.set_ylim(bbox[2], bbox[3])
    axes.set_xlabel('v1')
    axes.set_ylabel('u2')
    axes.axhline(0.0, color='0.8', linewidth=0.6)
    axes.axvline(0.0, color='0.8', linewidth=0.6)
    if title:
        axes.set_title(title)
    if axes.get_legend_handles_labels()[0]:
        axes.legend(loc='upper right')
    return figure


class ResultStorage:
    """
    Storage for tables, JSON documents and figures produced by the command
    line front end.

    Two strategies are supported: 'memory' keeps results in dictionaries,
    'file' writes them under an output directory together with a
    `<name>_metadata.json` sidecar. Nothing written depends on the clock, so
    identical inputs produce identical bytes.
    """

    def __init__(self, storage_type: str = 'file', output_dir: str = settings.OUTPUT_DIR):
        """
        Initialize the ResultStorage.

        Args:
            storage_type (str): 'memory' or 'file'
            output_dir (str): Directory for file storage
        """
        if storage_type not in ('memory', 'file'):
            raise InvalidParamsError(f"storage_type={storage_type!r} must be 'memory' or 'file'")
        self.storage_type = storage_type
        self.output_dir = output_dir

        self.tables: Dict[str, pd.DataFrame] = {}
        self.documents: Dict[str, Dict[str, Any]] = {}
        self.figures: Dict[str, bytes] = {}
        self.metadata: Dict[str, Dict[str, Any]] = {}

    def _path(self, name: str, extension: str) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        return os.path.join(self.output_dir, f"{name}.{extension}")

    def store_table(self, name: str, df: pd.DataFrame, fmt: str = 'csv',
                    config: Optional[Dict[str, Any]] = None) -> Optional[str]:
        """
        Store a result table.

        Args:
            name (str): Name of the result
            df (pd.DataFrame): The table
            fmt (str): 'csv' or 'xlsx'
            config (Dict): Command configuration recorded in the metadata

        Returns:
            Optional[str]: Path written, or None for memory storage
        """
        if fmt not in TABLE_FORMATS:
            raise InvalidParamsError(f"format={fmt!r} must be one of {TABLE_FORMATS}")
        self._record(name, 'table', config, row_count=len(df), columns=list(df.columns))
        if self.storage_type == 'memory':
            self.tables[name] = df.copy()
            return None

        path = self._path(name, fmt)
        if fmt == 'csv':
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(render_csv(df))
        else:
            with pd.ExcelWriter(path, engine='openpyxl') as writer:
                df.to_excel(writer, sheet_name=name[:31] or 'results', index=False)
        self._write_metadata(name)
        logger.info("wrote %d rows to %s", len(df), path)
        return path

    def store_json(self, name: str, payload: Dict[str, Any],
                   config: Optional[Dict[str, Any]] = None) -> Optional[str]:
        self._record(name, 'json', config, keys=list(payload))
        if self.storage_type == 'memory':
            self.documents[name] = dict(payload)
            return None
        path = self._path(name, 'json')
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(render_json(payload))
        self._write_metadata(name)
        logger.info("wrote %s", path)
        return path

    def store_figure(self, name: str, figure, config: Optional[Dict[str, Any]] = None) -> Optional[str]:
        """
        Store a matplotlib figure as SVG.

        The SVG id salt is fixed and the date metadata suppressed, so reruns
        produce identical files.
        """
        self._record(name, 'svg', config)
        with matplotlib.rc_context({'svg.hashsalt': settings.SVG_HASHSALT,
                                    'svg.fonttype': 'path'}):
            if self.storage_type == 'memory':
                buffer = BytesIO()
                figure.savefig(buffer, format='svg', metadata={'Date': None})
                self.figures[name] = buffer.getvalue()
                plt.close(figure)
                return None
            path = self._path(name, 'svg')
            figure.savefig(path, format='svg', metadata={'Date': None})
        plt.close(figure)
        self._write_metadata(name)
        logger.info("wrote %s", path)
        return path

    def _record(self, name: str, kind: str, config: Optional[Dict[str, Any]], **details):
        entry = {'name': name, 'kind': kind, 'config': config or {}}
        entry.update(details)
        self.metadata[name] = entry

    def _write_metadata(self, name: str):
        path = os.path.join(self.output_dir, f"{name}_metadata.json")
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(render_json(self.metadata[name]))

    def get_metadata(self, name: str) -> Dict[str, Any]:
        """
        Get metadata for a stored result.

        Args:
            name (str): Name of the result

        Returns:
            Dict: Metadata dictionary, empty when unknown
        """
        if name in self.metadata:
            return self.metadata[name]
        if self.storage_type == 'file':
            path = os.path.join(self.output_dir, f"{name}_metadata.json")
            if os.path.exists(path):
                with open(path, 'r', encoding='utf-8') as f:
                    return json.load(f)
        return {}

    def list_results(self) -> List[str]:
        return sorted(self.metadata)
