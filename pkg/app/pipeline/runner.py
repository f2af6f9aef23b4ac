import logging
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from app.core.errors import ConfigError, DataError, NumericalError, StageError
from app.data.datagen import load_csv, make_blobs, split_balanced
from app.learning.ksvm import KernelKind, SvmConfig, fit_multiclass, grid_search_c, predict
from app.learning.qka import align, initial_theta
from app.numerics.aalr import AalrScaler
from app.numerics.metrics import classification_report, silhouette
from app.numerics.slr import fit_slr, transform_lda, transform_pca
from app.pipeline.projection import emit_projection, emit_trace_csv
from app.pipeline.schemas import BaselineEval, RunReport, Stage
from app.quantum.qkernel import KernelConfig, eval_kernel, train_kernel
from app.quantum.qsim import AnsatzConfig, FeatureMapConfig, Ordering, build_ansatz, build_feature_map, format_circuit
from app.services.artifact_service import ArtifactService
from app.services.model_store import save_bundle

logger = logging.getLogger(__name__)

# Table of classical baselines run on both representation tiers.
BASELINES = {
    "linear_svm": SvmConfig(c_reg=1.0, kernel_kind=KernelKind.LINEAR),
    "rbf_svm": SvmConfig(c_reg=1.0, kernel_kind=KernelKind.RBF, gamma="scale"),
}


def _safe_silhouette(features, labels):
    try:
        return silhouette(features, labels)
    except DataError as exc:
        logger.warning(f"silhouette skipped: {exc}")
        return None


class ExperimentRunner:
    """Runs SLR -> AALR -> QKA -> QSVC (plus classical baselines) for one config."""

    def __init__(self, config, artifact_service=None):
        self.config = config
        self.artifacts = artifact_service or ArtifactService(config.output_dir)
        self.report = RunReport(config=config.model_dump(mode="json"))

    @contextmanager
    def _stage(self, name):
        logger.info(f"Stage '{name}' started")
        start = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        finally:
            self.report.timings[name] = time.perf_counter() - start
        logger.info(f"Stage '{name}' finished in {self.report.timings[name]:.2f}s")

    def _reaches(self, stage):
        return self.config.stage_through.rank >= stage.rank

    def run(self):
        try:
            self.artifacts.prepare()
        except OSError as exc:
            logger.error(f"Cannot prepare output directory {self.artifacts.output_dir}: {exc}")
            self.report.status = "failed"
            self.report.failed_stage = "prepare"
            self.report.error = str(exc)
            raise StageError("prepare", exc) from exc
        try:
            self._run_stages()
        except StageError as exc:
            logger.error(f"Run failed in stage '{exc.stage}': {exc.cause}", exc_info=True)
            self.report.status = "failed"
            self.report.failed_stage = exc.stage
            self.report.error = str(exc.cause)
            self.artifacts.save_report(self.report)
            self.artifacts.mark_failed(exc.stage, exc.cause)
            raise
        self.report.status = "completed"
        self.artifacts.save_report(self.report)
        return self.report

    def _run_stages(self):
        cfg = self.config
        with self._stage("data"):
            data = load_csv(cfg.data_csv) if cfg.data_csv else make_blobs(cfg.blobs)
            if cfg.d_out > data.n_classes - 1:
                raise ConfigError(f"d_out={cfg.d_out} exceeds C-1={data.n_classes - 1}")
            splits = split_balanced(data, cfg.splits.train_per_class, cfg.splits.val_per_class,
                                    cfg.splits.test_per_class, cfg.seed)
            self.report.dataset = {
                "n_samples": data.n_samples,
                "n_features": data.n_features,
                "n_classes": data.n_classes,
                "class_names": list(data.class_names),
                "train": splits.train.n_samples,
                "val": splits.val.n_samples,
                "test": splits.test.n_samples,
                "held_out_pool": splits.remainder.n_samples,
            }
        self.n_classes = data.n_classes
        self.splits = splits

        with self._stage("slr"):
            self.slr = fit_slr(splits.train, cfg.d_pca, cfg.d_out)
            slr_fingerprint = self.slr.fingerprint()
            self.pca = {name: transform_pca(self.slr, part.features) for name, part in self._parts()}
            self.lda = {name: transform_lda(self.slr, self.pca[name]) for name, _ in self._parts()}
            self._silhouettes()
            self._projections()
        self.scalers = []
        scaler_fingerprints = []

        if self._reaches(Stage.AALR):
            with self._stage("aalr"):
                for a, b in cfg.aalr.intervals:
                    self.scalers.append(AalrScaler.fit(self.lda["train"], a, b, cfg.aalr.epsilon))
                scaler_fingerprints = [s.fingerprint() for s in self.scalers]
                self.scaled = [{name: s.transform(self.lda[name]) for name, _ in self._parts()} for s in self.scalers]
            if cfg.baselines:
                with self._stage("baselines"):
                    self._baselines()

        if self._reaches(Stage.QKA):
            candidates = []
            for index, scaler in enumerate(self.scalers):
                with self._stage(f"qka[{index}]"):
                    state = self._align(self.scaled[index]["train"])
                candidate = {"scaler": scaler, "sets": self.scaled[index], "state": state}
                if self._reaches(Stage.FULL):
                    with self._stage(f"qsvc[{index}]"):
                        candidate.update(self._qsvc(self.scaled[index], state.theta))
                candidates.append(candidate)
            with self._stage("artifacts"):
                self._select(candidates)

        self._leakage_audit(slr_fingerprint, scaler_fingerprints)

    def _parts(self):
        s = self.splits
        return [("train", s.train), ("val", s.val), ("test", s.test), ("remainder", s.remainder)]

    def _labels(self, name):
        return dict(self._parts())[name].labels

    def _silhouettes(self):
        result = {}
        for name in ("train", "test"):
            labels = self._labels(name)
            result[name] = {
                "raw": _safe_silhouette(dict(self._parts())[name].features, labels),
                "pca": _safe_silhouette(self.pca[name], labels),
                "lda": _safe_silhouette(self.lda[name], labels),
            }
        self.report.silhouette = result
        logger.info(f"Silhouette (train): {result['train']}")

    def _projections(self):
        for tier, latents in (("pca", self.pca), ("lda", self.lda)):
            for split in ("train", "test"):
                if latents[split].shape[0] and latents[split].shape[1] >= 2:
                    name = f"projection_{tier}_{split}.csv"
                    self.artifacts.save_text(name, emit_projection(latents[split], self._labels(split)))
                    self.report.artifacts[f"projection_{tier}_{split}"] = name

    def _baselines(self):
        pool = "remainder"
        if self.config.baselines_eval is BaselineEval.TEST or self.splits.remainder.n_samples == 0:
            pool = "test"
        result = {"eval_pool": pool, "eval_samples": int(self._labels(pool).shape[0])}
        for tier, latents in (("pca", self.pca), ("lda", self.lda)):
            result[tier] = {}
            for name, svm_cfg in BASELINES.items():
                model = fit_multiclass(latents["train"], self._labels("train"), svm_cfg, self.n_classes)
                predictions = predict(model, latents[pool]) if latents[pool].shape[0] else np.zeros(0, dtype=np.int64)
                report = classification_report(self._labels(pool), predictions, self.n_classes)
                result[tier][name] = report.to_dict()
                logger.info(f"Baseline {name} on {tier}: accuracy={report.accuracy:.3f} macro_f1={report.macro_f1:.3f}")
        self.report.baselines = result

    def _kernel_config(self):
        cfg = self.config
        return KernelConfig(
            feature_map=FeatureMapConfig(n_qubits=cfg.n_qubits, reps=cfg.feature_map.reps,
                                         entanglement=cfg.feature_map.entanglement),
            ansatz=AnsatzConfig(n_qubits=cfg.n_qubits, reps=cfg.ansatz.reps, entanglement=cfg.ansatz.entanglement),
            ordering=Ordering.ANSATZ_FIRST,
        )

    def _align(self, train_latents):
        cfg = self.config
        kernel_cfg = self._kernel_config()
        theta0 = initial_theta(kernel_cfg.ansatz.param_count, cfg.theta_init, cfg.seed)
        return align(train_latents, self._labels("train"), kernel_cfg, cfg.spsa, cfg.loss, cfg.svc_loss_c, theta0)

    def _qsvc(self, sets, theta):
        kernel_cfg = self._kernel_config()
        y_train = self._labels("train")
        k_train = train_kernel(sets["train"], theta, kernel_cfg)
        k_val = eval_kernel(sets["val"], sets["train"], theta, kernel_cfg)
        k_test = eval_kernel(sets["test"], sets["train"], theta, kernel_cfg)

        def macro_f1(y_true, y_pred):
            return classification_report(y_true, y_pred, self.n_classes).macro_f1

        base = SvmConfig(kernel_kind=KernelKind.PRECOMPUTED)
        best, results = grid_search_c(k_train.values, y_train, k_val.values, self._labels("val"),
                                      self.config.c_grid, macro_f1, base, self.n_classes)
        grid = [
            {"c_reg": r.c_reg, "validation": classification_report(self._labels("val"), r.predictions, self.n_classes).to_dict()}
            for r, _ in results
        ]
        test_pred = predict(best.model, k_test.values) if k_test.shape[0] else np.zeros(0, dtype=np.int64)
        return {
            "kernels": (k_train, k_test),
            "model": best.model,
            "val_macro_f1": macro_f1(self._labels("val"), best.predictions),
            "qsvc": {
                "grid": grid,
                "chosen_c": best.c_reg,
                "validation": classification_report(self._labels("val"), best.predictions, self.n_classes).to_dict(),
                "test": classification_report(self._labels("test"), test_pred, self.n_classes).to_dict(),
                "train_kernel_shape": list(k_train.shape),
                "theta_fingerprint": k_train.theta_fingerprint,
            },
        }

    def _select(self, candidates):
        full = self._reaches(Stage.FULL)
        if full:
            chosen = int(np.argmax([c["val_macro_f1"] for c in candidates]))
        else:
            # Without a QSVC stage the lowest alignment loss decides.
            losses = [c["state"].final_loss for c in candidates]
            chosen = 0 if None in losses else int(np.argmin(losses))
        self.report.interval_selection = [
            {
                "interval": [c["scaler"].a, c["scaler"].b],
                "final_loss": c["state"].final_loss,
                "val_macro_f1": c.get("val_macro_f1"),
                "chosen_c": c["qsvc"]["chosen_c"] if full else None,
                "selected": i == chosen,
            }
            for i, c in enumerate(candidates)
        ]
        best = candidates[chosen]
        state = best["state"]
        kernel_cfg = self._kernel_config()
        self.report.qka = {
            "interval": [best["scaler"].a, best["scaler"].b],
            "n_qubits": kernel_cfg.n_qubits,
            "n_params": kernel_cfg.ansatz.param_count,
            "loss": self.config.loss.value,
            "ordering": kernel_cfg.ordering.value,
            "initial_loss": state.initial_loss,
            "final_loss": state.final_loss,
            "iterations": len(state.trace),
            "accepted_steps": state.accepted_steps,
            "kernel_builds": state.n_evaluations,
            "capped_svm_pairs": state.capped_pairs,
            "theta": state.theta.tolist(),
        }
        self.report.artifacts["spsa_trace"] = self.artifacts.save_trace("spsa_trace.jsonl", state.trace)
        self.report.artifacts["spsa_trace_csv"] = self.artifacts.save_text("spsa_trace.csv", emit_trace_csv(state.trace))
        # Trained ansatz followed by the feature map of the first training row.
        circuit = build_ansatz(kernel_cfg.ansatz, state.theta) + build_feature_map(kernel_cfg.feature_map, best["sets"]["train"][0])
        self.report.artifacts["circuit"] = self.artifacts.save_text("circuit.txt", format_circuit(circuit))
        qsvc_model = None
        if full:
            self.report.qsvc = best["qsvc"]
            k_train, k_test = best["kernels"]
            self.report.artifacts["train_kernel"] = self.artifacts.save_matrix_csv("train_kernel.csv", k_train.values)
            self.report.artifacts["test_kernel"] = self.artifacts.save_matrix_csv("test_kernel.csv", k_test.values)
            qsvc_model = best["model"]
        bundle = save_bundle(self.artifacts.path("model.npz"), self.slr, best["scaler"], state.theta, qsvc_model)
        self.report.artifacts["model"] = Path(bundle).name

    def _leakage_audit(self, slr_before, scalers_before):
        slr_after = self.slr.fingerprint()
        scalers_after = [s.fingerprint() for s in self.scalers]
        unchanged = slr_before == slr_after and scalers_before == scalers_after
        self.report.leakage_audit = {
            "slr_fingerprint": slr_after,
            "aalr_fingerprints": scalers_after,
            "unchanged": unchanged,
        }
        if not unchanged:
            raise StageError("leakage_audit", NumericalError("fitted statistics changed after transforming evaluation data"))


def run_experiment(config):
    return ExperimentRunner(config).run()
