# database.py
import json
import logging
import time
from typing import Any, Dict, List, Optional, Sequence

import aiosqlite

import config

logger = logging.getLogger("risadc.db")

DB_PATH = config.RESULTS_DB

# column order of the trials table; rows handed to add_trial_rows are dicts with these keys
TRIAL_COLUMNS = (
    "scheme", "param_value", "trial_index", "seed", "sum_rate", "bits",
    "iterations", "status", "wall_time",
)

# -------------------------
# Low-level helpers
# -------------------------
async def _table_exists(db: aiosqlite.Connection, name: str) -> bool:
    cur = await db.execute("SELECT name FROM sqlite_master WHERE type='table' AND name=?", (name,))
    return (await cur.fetchone()) is not None

# -------------------------
# Initialization
# -------------------------
async def init_db(path: str = DB_PATH):
    """
    Create the sweeps and trials tables if missing.
    """
    async with aiosqlite.connect(path) as db:
        await db.execute("""
            CREATE TABLE IF NOT EXISTS sweeps (
                sweep_id INTEGER PRIMARY KEY AUTOINCREMENT,
                param TEXT NOT NULL,
                schemes TEXT NOT NULL,
                scenario TEXT NOT NULL,
                created_at INTEGER DEFAULT (strftime('%s','now'))
            )
        """)

        # one row per (scheme, parameter value, trial)
        await db.execute("""
            CREATE TABLE IF NOT EXISTS trials (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                sweep_id INTEGER NOT NULL REFERENCES sweeps(sweep_id),
                scheme TEXT NOT NULL,
                param_value REAL,
                trial_index INTEGER NOT NULL,
                seed TEXT NOT NULL,
                sum_rate REAL,
                bits INTEGER,
                iterations INTEGER,
                status TEXT NOT NULL,
                wall_time REAL
            )
        """)
        # unswept runs store NULL values; IFNULL makes re-runs collide
        await db.execute("""
            CREATE UNIQUE INDEX IF NOT EXISTS trials_key
            ON trials (sweep_id, scheme, IFNULL(param_value, -1), trial_index)
        """)
        await db.commit()
    logger.debug("[DB] init_db(%s)", path)

# -------------------------
# Sweeps
# -------------------------
async def create_sweep(param: str, schemes: Sequence[str], scenario_text: str, path: str = DB_PATH) -> int:
    async with aiosqlite.connect(path) as db:
        cur = await db.execute(
            "INSERT INTO sweeps (param, schemes, scenario, created_at) VALUES (?, ?, ?, ?)",
            (param, json.dumps(list(schemes)), scenario_text, int(time.time())),
        )
        await db.commit()
        sweep_id = cur.lastrowid
    logger.debug("[DB] create_sweep(%s, %s) -> %s", param, list(schemes), sweep_id)
    return sweep_id

async def list_sweeps(path: str = DB_PATH, limit: int = 100) -> List[Dict[str, Any]]:
    async with aiosqlite.connect(path) as db:
        if not await _table_exists(db, "sweeps"):
            return []
        db.row_factory = aiosqlite.Row
        cur = await db.execute(
            """
            SELECT s.sweep_id, s.param, s.schemes, s.created_at, COUNT(t.id) AS n_trials
            FROM sweeps s LEFT JOIN trials t ON t.sweep_id = s.sweep_id
            GROUP BY s.sweep_id ORDER BY s.sweep_id DESC LIMIT ?
            """,
            (limit,),
        )
        rows = await cur.fetchall()
    return [dict(r) | {"schemes": json.loads(r["schemes"])} for r in rows]

# -------------------------
# Trial rows
# -------------------------
async def add_trial_rows(sweep_id: int, rows: Sequence[Dict[str, Any]], path: str = DB_PATH) -> int:
    """
    Insert completed trial rows. A row already stored for the same
    (sweep, scheme, value, trial) is replaced. Returns the number of rows written.
    """
    if not rows:
        return 0
    cols = ", ".join(TRIAL_COLUMNS)
    marks = ", ".join("?" for _ in TRIAL_COLUMNS)
    values = [(sweep_id, *(r.get(c) for c in TRIAL_COLUMNS)) for r in rows]
    async with aiosqlite.connect(path) as db:
        await db.executemany(
            f"INSERT OR REPLACE INTO trials (sweep_id, {cols}) VALUES (?, {marks})", values
        )
        await db.commit()
    logger.debug("[DB] add_trial_rows(%s) -> %s rows", sweep_id, len(values))
    return len(values)

async def get_sweep_rows(sweep_id: int, scheme: Optional[str] = None, path: str = DB_PATH) -> List[Dict[str, Any]]:
    query = f"SELECT {', '.join(TRIAL_COLUMNS)} FROM trials WHERE sweep_id = ?"
    args: tuple = (sweep_id,)
    if scheme is not None:
        query += " AND scheme = ?"
        args += (scheme,)
    query += " ORDER BY scheme, param_value, trial_index"
    async with aiosqlite.connect(path) as db:
        db.row_factory = aiosqlite.Row
        cur = await db.execute(query, args)
        rows = await cur.fetchall()
    logger.debug("[DB] get_sweep_rows(%s, %s) -> %s rows", sweep_id, scheme, len(rows))
    return [dict(r) for r in rows]
