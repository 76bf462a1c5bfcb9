import asyncio
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional

from config.experiment import ExperimentConfig
from config.settings import MAX_WORKERS
from services.artifact_store import RunManifest
from services.experiment_runner import run_experiment
from utils.logger import get_service_logger

Runner = Callable[[ExperimentConfig, Path], RunManifest]


class ExperimentQueue:
    """Runs submitted experiments on worker threads, at most max_workers at once.

    Every job writes only to its own output directory, so jobs share no state.
    """

    def __init__(self, max_workers: int = MAX_WORKERS, runner: Runner = run_experiment):
        if max_workers < 1:
            raise ValueError(f"max_workers must be positive: got {max_workers}")
        self.logger = get_service_logger("experiment_queue")
        self.max_workers = max_workers
        self.runner = runner
        self.jobs: Dict[str, tuple] = {}
        self.tasks: Dict[str, asyncio.Task] = {}
        self.started: Dict[str, datetime] = {}
        self.finished: Dict[str, datetime] = {}
        self.manifests: Dict[str, RunManifest] = {}
        self.errors: Dict[str, str] = {}
        self.is_running = False

    def submit(self, name: str, cfg: ExperimentConfig, out_dir: Path):
        """Queue one experiment under a unique name"""
        if name in self.jobs:
            raise ValueError(f"Job {name} already submitted")
        self.jobs[name] = (cfg, Path(out_dir))
        self.logger.info(f"Queued {cfg.experiment.value} as {name} -> {out_dir}")

    async def _run_job(self, name: str, semaphore: asyncio.Semaphore):
        cfg, out_dir = self.jobs[name]
        async with semaphore:
            self.started[name] = datetime.now()
            try:
                self.manifests[name] = await asyncio.to_thread(self.runner, cfg, out_dir)
                self.logger.info(f"Job {name} finished: {self.manifests[name].outcome}")
            except Exception as e:
                self.errors[name] = str(e)
                self.logger.error(f"Error in job {name}: {str(e)}")
            finally:
                self.finished[name] = datetime.now()

    async def run_all(self) -> Dict[str, RunManifest]:
        """Run every pending job and wait for all of them"""
        self.is_running = True
        semaphore = asyncio.Semaphore(self.max_workers)
        pending = [name for name in self.jobs if name not in self.tasks]
        for name in pending:
            self.tasks[name] = asyncio.create_task(self._run_job(name, semaphore))
        self.logger.info(f"Running {len(pending)} jobs on {self.max_workers} workers")
        try:
            await asyncio.gather(*(self.tasks[name] for name in pending))
        finally:
            self.is_running = False
        return dict(self.manifests)

    async def stop(self):
        """Cancel jobs that have not started; running threads finish their experiment"""
        self.is_running = False
        for name, task in self.tasks.items():
            if task.done():
                continue
            task.cancel()
            try:
                await task
            except asyncio.CancelledError:
                pass
            self.logger.info(f"Cancelled job: {name}")
        self.logger.info("Experiment queue stopped")

    def get_task_status(self, name: str) -> Dict:
        """Get status of a submitted job"""
        if name not in self.jobs:
            return {"status": "not_found"}

        manifest: Optional[RunManifest] = self.manifests.get(name)
        task = self.tasks.get(name)
        if name in self.finished:
            status = "finished"
        elif name in self.started:
            status = "running"
        elif task is not None and task.cancelled():
            status = "cancelled"
        else:
            status = "queued"
        return {
            "status": status,
            "started": self.started.get(name),
            "finished": self.finished.get(name),
            "outcome": manifest.outcome if manifest else None,
            "error": self.errors.get(name) or (manifest.error if manifest else None),
        }

    def names(self) -> List[str]:
        return list(self.jobs)
