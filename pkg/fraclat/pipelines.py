import enum
import json
import math
import os
import tempfile

import numpy as np
import pandas as pd

from . import settings


def to_plain(value):
    """转换为可 JSON 序列化的纯 Python 值 (NaN/Inf → None)"""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_plain(value.real), to_plain(value.imag)]
    if isinstance(value, enum.Enum):
        return value.value
    return value


def _dumps(data):
    return json.dumps(to_plain(data), ensure_ascii=False, indent=2, sort_keys=True) + '\n'


class OutputPipeline:
    """原子写出 CSV/JSON，每个 CSV 附带 <name>.meta.json"""

    def __init__(self, directory, metadata=None):
        self.directory = str(directory)
        self.metadata = dict(metadata or {})
        self.written = []

    def _atomic_write(self, name, text):
        os.makedirs(self.directory, exist_ok=True)
        path = os.path.join(self.directory, name)
        fd, tmp = tempfile.mkstemp(prefix=f'.{name}.', suffix='.tmp', dir=self.directory)
        try:
            with os.fdopen(fd, 'w', encoding=settings.CSV_ENCODING, newline='') as f:
                f.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
        self.written.append(path)
        return path

    def export_to_csv(self, name, frame):
        """导出 DataFrame，17 位有效数字"""
        if not isinstance(frame, pd.DataFrame):
            frame = pd.DataFrame(frame)
        text = frame.to_csv(
            index=False, float_format=settings.CSV_FLOAT_FORMAT, lineterminator='\n',
        )
        path = self._atomic_write(name, text)
        sidecar = {
            **self.metadata,
            'artifact_version': settings.ARTIFACT_VERSION,
            'file': name,
            'columns': list(frame.columns),
            'rows': len(frame),
        }
        self._atomic_write(f'{name}.meta.json', _dumps(sidecar))
        return path

    def export_to_json(self, name, data):
        payload = {'artifact_version': settings.ARTIFACT_VERSION, **to_plain(data)}
        return self._atomic_write(name, _dumps(payload))
