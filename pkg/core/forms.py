# =============================================================================
# forms.py — Validación de la configuración de experimentos
# =============================================================================
# Contiene:
# 1) Defaults (configuración de referencia: 6 MENs, 2×64, r=0.8, λ=0.001,
#    T=2000, 200MB, 60Mbps, 80/20)
# 2) Secciones de las claves con punto del archivo JSON (train.epochs, ...)
# 3) ExperimentConfigForm: valida el diccionario ya mezclado
#    (defaults ← archivo ← flags de la CLI)
# -----------------------------------------------------------------------------

# =============================================================================
# IMPORTS
# =============================================================================
from django import forms

from core.engine.dist import Topology
from core.engine.optim import AdamMode
from core.engine.params import Activation
from core.ingestion_helpers import FORMATS

# =============================================================================
# CONSTANTES (evitan “números mágicos”)
# =============================================================================
METHODS = ("svd", "nmf", "dl", "ddl")
PLACEMENT_SCORES = ("demand", "rating")

DEFAULTS = {
    # --- datos ---
    "dataset": "",
    "format": "movielens-dat",
    "synth_users": None,
    "synth_contents": 40,
    "synth_density": 0.3,
    "synth_zipf": 1.0,
    "split_ratio": 0.8,
    "rating_min": 1.0,
    "rating_max": 5.0,
    # --- entrenamiento ---
    "topology": "ddl",
    "mens": 6,
    "batch": 60,
    "epochs": 2000,
    "dropout": 0.8,
    "dropout_keep": False,
    "hidden": "64,64",
    "output_activation": "relu",
    "adam_mode": "paper",
    "adam_step": 0.001,
    "adam_decay_eta": 0.9,
    "adam_decay_delta": 0.999,
    "adam_eps": 1e-8,
    "tol": 1e-5,
    "patience": 50,
    "zero_fill": False,
    "weighted_mean": False,
    "parallel_workers": False,
    "eval_every": 0,
    # --- baselines ---
    "svd_rank": 16,
    "nmf_rank": 16,
    "nmf_iters": 200,
    # --- red ---
    "content_size_mb": 200.0,
    "bw_cs_mbps": 60.0,
    "bw_men_mbps": 100.0,
    "bw_user_mbps": 100.0,
    # --- caché ---
    "capacities": "1000,2000,4000,8000",
    "dl_global_agg": True,
    "placement_score": "demand",
    "count_neighbor_hits": False,
    "zero_local_delay": False,
    # --- corrida ---
    "methods": ",".join(METHODS),
    "seed": 2020,
    "out": "",
    "parallel": False,
}

SECTIONS = {
    "data": ("dataset", "format", "synth_users", "synth_contents", "synth_density",
             "synth_zipf", "split_ratio", "rating_min", "rating_max"),
    "train": ("topology", "mens", "batch", "epochs", "dropout", "dropout_keep", "hidden",
              "output_activation", "adam_mode", "adam_step", "adam_decay_eta",
              "adam_decay_delta", "adam_eps", "tol", "patience", "zero_fill",
              "weighted_mean", "parallel_workers", "eval_every"),
    "baselines": ("svd_rank", "nmf_rank", "nmf_iters"),
    "network": ("content_size_mb", "bw_cs_mbps", "bw_men_mbps", "bw_user_mbps"),
    "cache": ("capacities", "dl_global_agg", "placement_score", "count_neighbor_hits",
              "zero_local_delay"),
    "run": ("methods", "seed", "out", "parallel"),
}

SECTION_OF = {dest: section for section, dests in SECTIONS.items() for dest in dests}


# =============================================================================
# HELPERS
# =============================================================================
def dotted_key(dest: str) -> str:
    return f"{SECTION_OF[dest]}.{dest}"


def _split_list(raw) -> list[str]:
    if isinstance(raw, (list, tuple)):
        return [str(x).strip() for x in raw if str(x).strip()]
    return [p.strip() for p in str(raw or "").split(",") if p.strip()]


def _positive_float(name: str):
    def _clean(self):
        v = self.cleaned_data.get(name)
        if v is not None and v <= 0:
            raise forms.ValidationError(f"'{name}' debe ser mayor a cero.")
        return v
    return _clean


# =============================================================================
# FORMULARIO
# =============================================================================
class ExperimentConfigForm(forms.Form):
    """
    Valida la configuración resuelta de un experimento.
    Reglas transversales:
      - hay dataset o parámetros sintéticos
      - en DDL, β divisible por N
    """

    # --- datos ---
    dataset = forms.CharField(required=False)
    format = forms.ChoiceField(choices=[(f, f) for f in FORMATS])
    synth_users = forms.IntegerField(required=False, min_value=1)
    synth_contents = forms.IntegerField(min_value=1)
    synth_density = forms.FloatField(min_value=0.0, max_value=1.0)
    synth_zipf = forms.FloatField(min_value=0.0)
    split_ratio = forms.FloatField(min_value=0.0, max_value=1.0)
    rating_min = forms.FloatField()
    rating_max = forms.FloatField()

    # --- entrenamiento ---
    topology = forms.ChoiceField(choices=[(t.value, t.value) for t in Topology])
    mens = forms.IntegerField(min_value=1)
    batch = forms.IntegerField(min_value=1)
    epochs = forms.IntegerField(min_value=0)
    dropout = forms.FloatField(min_value=0.0, max_value=1.0)
    dropout_keep = forms.BooleanField(required=False)
    hidden = forms.CharField()
    output_activation = forms.ChoiceField(choices=[(a.value, a.value) for a in Activation])
    adam_mode = forms.ChoiceField(choices=[(m.value, m.value) for m in AdamMode])
    adam_step = forms.FloatField()
    adam_decay_eta = forms.FloatField(min_value=0.0)
    adam_decay_delta = forms.FloatField(min_value=0.0)
    adam_eps = forms.FloatField()
    tol = forms.FloatField(required=False, min_value=0.0)
    patience = forms.IntegerField(min_value=1)
    zero_fill = forms.BooleanField(required=False)
    weighted_mean = forms.BooleanField(required=False)
    parallel_workers = forms.BooleanField(required=False)
    eval_every = forms.IntegerField(min_value=0)

    # --- baselines ---
    svd_rank = forms.IntegerField(min_value=1)
    nmf_rank = forms.IntegerField(min_value=1)
    nmf_iters = forms.IntegerField(min_value=0)

    # --- red ---
    content_size_mb = forms.FloatField()
    bw_cs_mbps = forms.FloatField()
    bw_men_mbps = forms.FloatField()
    bw_user_mbps = forms.FloatField()

    # --- caché ---
    capacities = forms.CharField()
    dl_global_agg = forms.BooleanField(required=False)
    placement_score = forms.ChoiceField(choices=[(s, s) for s in PLACEMENT_SCORES])
    count_neighbor_hits = forms.BooleanField(required=False)
    zero_local_delay = forms.BooleanField(required=False)

    # --- corrida ---
    methods = forms.CharField()
    seed = forms.IntegerField(min_value=0)
    out = forms.CharField(required=False)
    parallel = forms.BooleanField(required=False)

    clean_adam_step = _positive_float("adam_step")
    clean_adam_eps = _positive_float("adam_eps")
    clean_content_size_mb = _positive_float("content_size_mb")
    clean_bw_cs_mbps = _positive_float("bw_cs_mbps")
    clean_bw_men_mbps = _positive_float("bw_men_mbps")
    clean_bw_user_mbps = _positive_float("bw_user_mbps")

    # --- Validaciones por campo ---
    def clean_hidden(self):
        try:
            sizes = tuple(int(p) for p in _split_list(self.cleaned_data.get("hidden")))
        except ValueError:
            raise forms.ValidationError("'hidden' debe ser una lista de enteros (ej: 64,64).")
        if any(s < 1 for s in sizes):
            raise forms.ValidationError("Cada capa oculta necesita al menos 1 neurona.")
        return sizes

    def clean_capacities(self):
        try:
            caps = [float(p) for p in _split_list(self.cleaned_data.get("capacities"))]
        except ValueError:
            raise forms.ValidationError("'capacities' debe ser una lista de MB (ej: 400,800).")
        if not caps:
            raise forms.ValidationError("Se necesita al menos una capacidad.")
        if any(c < 0 for c in caps):
            raise forms.ValidationError("Las capacidades no pueden ser negativas.")
        return tuple(caps)

    def clean_methods(self):
        methods = tuple(m.lower() for m in _split_list(self.cleaned_data.get("methods")))
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise forms.ValidationError(f"Métodos desconocidos: {', '.join(unknown)}.")
        if not methods or len(set(methods)) != len(methods):
            raise forms.ValidationError("Lista de métodos vacía o con repetidos.")
        return methods

    def clean_adam_decay_eta(self):
        v = self.cleaned_data.get("adam_decay_eta")
        if v is not None and v >= 1:
            raise forms.ValidationError("γ_η debe estar en [0,1).")
        return v

    def clean_adam_decay_delta(self):
        v = self.cleaned_data.get("adam_decay_delta")
        if v is not None and v >= 1:
            raise forms.ValidationError("γ_δ debe estar en [0,1).")
        return v

    # --- Validación transversal del formulario ---
    def clean(self):
        cleaned = super().clean()

        if not (cleaned.get("dataset") or "").strip() and not cleaned.get("synth_users"):
            raise forms.ValidationError(
                "Falta el dataset: indica --dataset (o EDGECACHE_DATA_DIR) o --synth-users."
            )

        split_ratio = cleaned.get("split_ratio")
        if split_ratio is not None and not 0 < split_ratio < 1:
            self.add_error("split_ratio", "El ratio de train debe estar en (0,1).")

        lo, hi = cleaned.get("rating_min"), cleaned.get("rating_max")
        if lo is not None and hi is not None and hi <= lo:
            self.add_error("rating_max", "rating_max debe ser mayor que rating_min.")

        dropout, keep = cleaned.get("dropout"), cleaned.get("dropout_keep")
        if dropout is not None:
            rate = 1.0 - dropout if keep else dropout
            if not 0 <= rate < 1:
                self.add_error("dropout", "La fracción descartada debe quedar en [0,1).")

        mens, batch = cleaned.get("mens"), cleaned.get("batch")
        methods = cleaned.get("methods") or ()
        needs_ddl = "ddl" in methods or cleaned.get("topology") == Topology.DDL.value
        if mens and batch and needs_ddl and batch % mens:
            self.add_error("batch", f"β={batch} no es divisible por N={mens} (mini-batch β/N).")

        return cleaned
