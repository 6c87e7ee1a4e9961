import os

from dotenv import load_dotenv

load_dotenv()


def _env(name, default, cast=str):
    value = os.getenv(f'FRACLAT_{name}')
    if value is None or value == '':
        return default
    return cast(value)


PROJECT_NAME = 'fraclat'
ARTIFACT_VERSION = '1.0.0'

# 日志设置
LOG_LEVEL = _env('LOG_LEVEL', 'INFO')
LOG_DIR = _env('LOG_DIR', 'logs')
LOG_FILE_NAME = 'fraclat.log'
LOG_FORMAT = '%(asctime)s [%(levelname)s] %(message)s'
LOG_MAX_BYTES = 1_000_000
LOG_BACKUP_COUNT = 3

# 运行记录数据库（为空则不记录）
DATABASE_URL = _env('DATABASE_URL', '')

# FFT 线程数
FFT_WORKERS = _env('FFT_WORKERS', 1, int)

# 核函数
PARTIAL_SUM_TERMS = _env('PARTIAL_SUM_TERMS', 1_000_000, int)
TAIL_TOLERANCE = 1e-10
SERIES_TERM_FLOOR = 1e-17
SERIES_MAX_TERMS = 80
QUADRATURE_POINTS = _env('QUADRATURE_POINTS', 64, int)
QUADRATURE_TOLERANCE = 1e-8
QUADRATURE_GRADING_LEVELS = 48
POLYLOG_DPS = 30

# alpha 分类
CLASSIFY_K_MIN = _env('CLASSIFY_K_MIN', 1e-4, float)
CLASSIFY_K_MAX = _env('CLASSIFY_K_MAX', 1e-1, float)
CLASSIFY_POINTS = _env('CLASSIFY_POINTS', 24, int)
RESIDUAL_THRESHOLD = _env('RESIDUAL_THRESHOLD', 1e-2, float)
MODEL_SEPARATION = 10.0
QUADRATIC_BAND = 0.05
# k_min 处 k² 项占谱隙的比例低于此值时按高阶 (α > 2) 处理
HIGHER_ORDER_TOLERANCE = 0.1
CROSSOVER_FALLBACK_TOLERANCE = 0.05

# 连续介质求解
DEALIAS_FRACTION = 2.0 / 3.0
RK4_STABILITY_LIMIT = 2.8
GL_IMAGE_PERIODS = 8
GL_ALPHA_GAP = 0.05

# 输出
CSV_FLOAT_FORMAT = '%.16e'
CSV_ENCODING = 'utf-8'
DEFAULT_OUTPUT_DIR = _env('OUTPUT_DIR', 'output')
