from datetime import datetime

from sqlalchemy import Column, DateTime, Integer, String, create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from . import settings

Base = declarative_base()


class RunRecord(Base):
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True, autoincrement=True)
    command = Column(String, nullable=False)
    config_sha256 = Column(String(64), nullable=False)
    seed = Column(Integer)
    exit_status = Column(Integer, nullable=False)
    output_dir = Column(String)
    artifact_version = Column(String)
    created_at = Column(DateTime, default=datetime.utcnow)


def init_db(url=None):
    engine = create_engine(url or settings.DATABASE_URL)
    Base.metadata.create_all(engine)
    return sessionmaker(bind=engine)()


def record_run(session, **fields):
    record = RunRecord(**fields)
    session.add(record)
    try:
        session.commit()
    except Exception as e:
        session.rollback()
        raise e
    return record
