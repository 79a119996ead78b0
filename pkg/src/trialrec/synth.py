"""Deterministic synthetic trial corpus for desk-scale experiments.

The generator is calibrated so that a graph built from n trials (with exact-
match normalization) lands within tolerance of realistic registry proportions,
and textual fields come from templated phrase banks so genuine near-duplicates
exist across trials. Titles name the trial's primary measure, which ties each
trial's endpoint texts to its title.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import random

from .records import Condition, Intervention, TrialRecord

# Disease areas with relative frequency weights.
AREAS: list[tuple[str, int]] = [
    ("asthma", 125),
    ("cystic fibrosis", 440),
    ("chronic obstructive pulmonary disease", 183),
    ("early rheumatoid arthritis", 159),
    ("malignant pleural mesothelioma", 362),
    ("non-small cell lung cancer", 694),
    ("pulmonary hypertension", 416),
    ("systemic lupus erythematosus", 452),
    ("tuberculosis", 370),
]

AREA_MEASURES: dict[str, list[str]] = {
    "asthma": [
        "forced expiratory volume in one second",
        "peak expiratory flow rate",
        "asthma control questionnaire score",
        "annualized exacerbation rate",
        "fractional exhaled nitric oxide",
        "rescue medication use",
    ],
    "cystic fibrosis": [
        "percent predicted forced expiratory volume",
        "sweat chloride concentration",
        "pulmonary exacerbation frequency",
        "respiratory symptom questionnaire score",
        "body mass index",
        "lung clearance index",
    ],
    "chronic obstructive pulmonary disease": [
        "post-bronchodilator forced expiratory volume",
        "respiratory questionnaire total score",
        "moderate or severe exacerbation rate",
        "six minute walk distance",
        "transition dyspnea index",
        "daily symptom diary score",
    ],
    "early rheumatoid arthritis": [
        "disease activity score in 28 joints",
        "acr20 response rate",
        "swollen joint count",
        "c-reactive protein level",
        "disability index score",
        "radiographic progression score",
    ],
    "malignant pleural mesothelioma": [
        "overall survival",
        "progression free survival",
        "objective response rate",
        "tumor thickness by modified recist",
        "disease control rate",
        "global quality of life score",
    ],
    "non-small cell lung cancer": [
        "overall survival",
        "progression free survival",
        "objective response rate",
        "duration of response",
        "intracranial response rate",
        "disease free survival",
    ],
    "pulmonary hypertension": [
        "six minute walk distance",
        "pulmonary vascular resistance",
        "nt-probnp plasma level",
        "who functional class",
        "time to clinical worsening",
        "mean pulmonary arterial pressure",
    ],
    "systemic lupus erythematosus": [
        "sri-4 response rate",
        "sledai-2k total score",
        "bicla response rate",
        "annualized flare rate",
        "oral corticosteroid dose reduction",
        "fatigue severity score",
    ],
    "tuberculosis": [
        "sputum culture conversion rate",
        "time to culture conversion",
        "treatment success rate",
        "bacteriological relapse rate",
        "early bactericidal activity",
        "radiographic cavity resolution",
    ],
}

PHASES = [
    "Early Phase 1", "Phase 1", "Phase 1/Phase 2", "Phase 2",
    "Phase 2/Phase 3", "Phase 3", "Phase 4", "Not Applicable",
]
STATUSES = [
    "Completed", "Recruiting", "Active, not recruiting", "Terminated",
    "Withdrawn", "Suspended", "Enrolling by invitation",
    "Not yet recruiting", "Unknown status",
]
GENDERS = ["All", "Female", "Male"]
AGE_GROUPS = [
    "Adult", "Older Adult", "Child", "Adult, Older Adult",
    "Child, Adult", "Child, Adult, Older Adult",
]
POPULATIONS = [
    "adult patients", "adults", "elderly patients", "adolescents and adults",
    "treatment-naive patients", "previously treated patients",
]

# Per-trial densities and per-type pool sizes at the reference corpus size.
_REFERENCE_TRIALS = 2713
_POOL_BASES = {"cnt": 114, "ind": 1035, "int": 1220, "moa": 414, "tgt": 339}
_SHARED_BANK_SIZES = {"icr": 30, "ecr": 40, "sep": 25, "pep": 8}

_COUNTRY_NAMES = [
    "united states", "germany", "france", "united kingdom", "spain", "italy",
    "canada", "australia", "japan", "china", "south korea", "brazil",
    "netherlands", "belgium", "poland", "sweden", "denmark", "switzerland",
    "austria", "israel", "india", "mexico", "argentina", "south africa",
    "turkey", "russia", "taiwan", "hungary", "czech republic", "portugal",
]

_DRUG_PREFIXES = ["be", "ca", "du", "fe", "ga", "lu", "ma", "ne", "os", "pi",
                  "ra", "se", "ti", "vo", "xa", "ze", "bri", "clo", "dar", "eva"]
_DRUG_MIDS = ["lu", "ma", "ni", "ra", "ti", "vo", "za", "bre", "ci", "do"]
_DRUG_SUFFIXES = ["mab", "nib", "pril", "sartan", "stat", "zumab", "cept",
                  "tide", "vir", "lukast"]

_TARGET_STEMS = ["abl", "alk", "btk", "ccr", "cd", "cftr", "cxcr", "egfr",
                 "erk", "fgfr", "gpr", "hdac", "ifn", "il", "irak", "itk",
                 "jak", "kit", "kras", "mek", "met", "mtor", "nlrp", "pde",
                 "pi3k", "plk", "ret", "ros", "syk", "tgf", "tnf", "trk",
                 "tyk", "vegfr"]
_MOA_ACTIONS = ["inhibitor", "antagonist", "agonist", "modulator", "blocker",
                "activator", "degrader", "stabilizer"]

_IND_ADJS = ["chronic", "refractory", "secondary", "recurrent", "progressive",
             "idiopathic", "acute", "severe", "moderate", "persistent",
             "advanced", "early-stage", "late-onset", "familial", "seasonal",
             "occupational", "drug-induced", "treatment-resistant"]
_IND_SITES = ["airway", "pulmonary", "pleural", "bronchial", "joint",
              "articular", "renal", "hepatic", "cardiac", "vascular",
              "cutaneous", "systemic", "bone", "muscular", "ocular", "nasal"]
_IND_FORMS = ["inflammation", "fibrosis", "insufficiency", "dysfunction"]


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0:
        return 0
    limit = math.exp(-lam)
    k, p = 0, rng.random()
    while p > limit:
        k += 1
        p *= rng.random()
    return k


def _pool_size(kind: str, n_trials: int) -> int:
    return max(1, round(_POOL_BASES[kind] * n_trials / _REFERENCE_TRIALS))


def _stable_digits(name: str, width: int) -> str:
    digest = int(hashlib.md5(name.encode("utf-8")).hexdigest()[:10], 16)
    return str(digest % 10**width).zfill(width)


def _name_pool(parts: list[list[str]], size: int, fmt: str) -> list[str]:
    names = []
    for combo in itertools.product(*parts):
        names.append(fmt.format(*combo))
        if len(names) >= size:
            return names
    # pad with numbered variants when combinatorics run out
    i = 0
    while len(names) < size:
        names.append(f"{names[i % len(names)]} type {i // len(names) + 2}")
        i += 1
    return names


def _country_pool(size: int) -> list[str]:
    pool = list(_COUNTRY_NAMES[:size])
    i = 0
    while len(pool) < size:
        pool.append(f"study region {i + 1:03d}")
        i += 1
    return pool


def _catalogs(n_trials: int) -> dict:
    n_int = _pool_size("int", n_trials)
    n_moa = _pool_size("moa", n_trials)
    n_tgt = _pool_size("tgt", n_trials)
    drugs = _name_pool(
        [_DRUG_PREFIXES, _DRUG_MIDS, _DRUG_SUFFIXES], n_int, "{0}{1}{2}"
    )
    targets = _name_pool([_TARGET_STEMS, [str(d) for d in range(1, 30)]], n_tgt, "{0}{1}")
    moas = _name_pool(
        [[f"{t}" for t in targets] or ["pathway"], _MOA_ACTIONS], n_moa, "{0} {1}"
    )
    conditions = _name_pool([_IND_ADJS, _IND_SITES, _IND_FORMS], max(
        1, _pool_size("ind", n_trials) - len(AREAS)), "{0} {1} {2}")
    # roughly a quarter of the drug catalog carries mechanism curation
    annotations: dict[str, tuple[list[str], list[str]]] = {}
    for j, drug in enumerate(drugs):
        if j % 40 >= 11:
            continue
        drug_moas = [moas[(3 * j + m) % len(moas)] for m in range(3)]
        n_t = 2 + (1 if j % 4 == 0 else 0)
        drug_targets = [targets[(7 * j + 11 * t) % len(targets)] for t in range(n_t)]
        annotations[drug] = (sorted(set(drug_moas)), sorted(set(drug_targets)))
    return {
        "countries": _country_pool(_pool_size("cnt", n_trials)),
        "conditions": conditions,
        "drugs": drugs,
        "annotations": annotations,
    }


def _shared_banks(kind: str, area: str, measures: list[str]) -> list[str]:
    """Fixed per-area phrase bank for criteria/endpoints shared across trials."""
    size = _SHARED_BANK_SIZES[kind]
    if kind == "icr":
        base = [
            "willing and able to provide written informed consent",
            "age 18 years or older at screening",
            f"documented diagnosis of {area} confirmed by a specialist",
            f"history of {area} for at least 12 months",
            "body mass index between 18 and 35",
            "negative pregnancy test at screening for women of childbearing potential",
            "able to comply with study visit schedule",
            f"stable background therapy for {area} for at least 4 weeks",
        ]
        variants = [f"{m} assessable at baseline" for m in measures]
        variants += [f"baseline {m} above the protocol threshold" for m in measures]
        variants += [f"documented history of inadequate response to standard {area} therapy",
                     "no participation in another interventional study within 30 days"]
    elif kind == "ecr":
        base = [
            "pregnant or breastfeeding women",
            "known hypersensitivity to the study medication or its excipients",
            "active malignancy within the past 5 years",
            "significant hepatic impairment defined as child-pugh class b or c",
            "estimated glomerular filtration rate below 30",
            "active or latent untreated infection at screening",
            "major surgery within 8 weeks prior to randomization",
            "history of substance abuse within 12 months",
            "participation in any other interventional trial within 30 days",
            f"any condition other than {area} likely to confound efficacy assessment",
        ]
        variants = [f"unstable {m} during the screening period" for m in measures]
        variants += [f"prior treatment failure attributed to abnormal {m}" for m in measures]
        variants += [f"contraindication to {area} standard of care",
                     "clinically significant electrocardiogram abnormality at screening",
                     "live vaccine received within 4 weeks of first dose",
                     "known immunodeficiency syndrome"]
    elif kind == "sep":
        base = [
            "incidence of treatment emergent adverse events",
            "change from baseline in patient reported quality of life",
            "plasma trough concentration of study drug",
            "proportion of participants discontinuing treatment",
            "all cause mortality during the study period",
        ]
        variants = [f"change from baseline in {m} at end of treatment" for m in measures]
        variants += [f"time to first improvement in {m}" for m in measures]
        variants += [f"durability of {m} response through follow-up" for m in measures]
    else:  # pep
        base = []
        variants = [f"change from baseline in {m} at the primary timepoint" for m in measures]
        variants += [f"proportion of participants achieving {m} response" for m in measures]
    bank = base + variants
    i = 0
    while len(bank) < size:
        bank.append(f"{bank[i % len(bank)]} (protocol definition {i + 2})")
        i += 1
    return bank[:size]


_CONFIRM_SOURCES = ["medical records", "spirometry", "physician assessment",
                    "central review", "laboratory confirmation", "imaging"]
_VALUE_UNITS = ["percent", "points", "units"]
_SEVERITIES = ["mild", "moderate", "severe", "very severe"]


def _unique_icr(rng: random.Random, area: str, measures: list[str]) -> str:
    m = rng.choice(measures)
    kind = rng.randrange(6)
    if kind == 0:
        return (f"{m} between {rng.randrange(30, 70)} and "
                f"{rng.randrange(70, 120)} percent of predicted at screening")
    if kind == 1:
        return (f"documented {area} for at least {rng.randrange(2, 36)} months "
                f"with {m} of {rng.randrange(10, 90)} "
                f"{rng.choice(_VALUE_UNITS)} at screening")
    if kind == 2:
        return (f"baseline {m} of at least {rng.randrange(10, 90)} "
                f"{rng.choice(_VALUE_UNITS)} recorded within "
                f"{rng.randrange(3, 30)} days")
    if kind == 3:
        return (f"stable dose of background medication for {rng.randrange(2, 16)} "
                f"weeks prior to baseline with {m} above {rng.randrange(5, 60)}")
    if kind == 4:
        return (f"age between {rng.randrange(18, 45)} and {rng.randrange(50, 85)} "
                f"years with {rng.choice(_SEVERITIES)} {area}")
    return (f"willingness to perform {m} assessments at {rng.randrange(2, 10)} "
            f"scheduled visits over {rng.randrange(8, 104)} weeks")


def _unique_ecr(rng: random.Random, area: str, measures: list[str]) -> str:
    m = rng.choice(measures)
    visit = rng.choice(["screening", "baseline", "randomization"])
    kind = rng.randrange(6)
    if kind == 0:
        return (f"{m} above {rng.randrange(40, 200)} at {visit} despite standard "
                f"therapy confirmed by {rng.choice(_CONFIRM_SOURCES)}")
    if kind == 1:
        return (f"systemic corticosteroid use exceeding {rng.randrange(5, 80)} mg "
                f"per day within {rng.randrange(2, 16)} weeks of {visit} with "
                f"abnormal {m}")
    if kind == 2:
        return (f"hospitalization for {area} within {rng.randrange(1, 24)} weeks "
                f"prior to {visit} with {m} below {rng.randrange(10, 90)}")
    if kind == 3:
        return (f"treatment with an investigational agent targeting {m} within "
                f"{rng.randrange(2, 40)} weeks or {rng.randrange(3, 8)} half-lives "
                f"before dose {rng.randrange(1, 6)}")
    if kind == 4:
        return (f"history of more than {rng.randrange(1, 13)} exacerbations requiring "
                f"intervention in the previous {rng.randrange(6, 37)} months "
                f"documented by {rng.choice(_CONFIRM_SOURCES)} with {m} decline")
    return (f"concurrent use of prohibited medication affecting {m} within "
            f"{rng.randrange(5, 91)} days of {visit} at a dose above "
            f"{rng.randrange(5, 60)} mg")


def _unique_pep(rng: random.Random, measure: str) -> str:
    kind = rng.randrange(4)
    if kind == 0:
        return f"change from baseline in {measure} at week {rng.randrange(2, 105)}"
    if kind == 1:
        return (f"proportion of participants with improved {measure} at "
                f"week {rng.randrange(2, 105)} {rng.choice(_ANALYSIS_SETS)}")
    if kind == 2:
        return f"time to first worsening of {measure} over {rng.randrange(12, 157)} weeks"
    return (f"percent change in {measure} from baseline to "
            f"week {rng.randrange(2, 105)} {rng.choice(_ANALYSIS_SETS)}")


_ANALYSIS_SETS = ["in the full analysis set", "in the per-protocol population",
                  "in the safety population", "among completers",
                  "in the intention-to-treat population", "in responders"]


def _unique_sep(rng: random.Random, measure: str) -> str:
    # month-based phrasing keeps secondary texts distinct from primary ones
    kind = rng.randrange(6)
    if kind == 0:
        return (f"change from baseline in {measure} at month {rng.randrange(1, 49)} "
                f"{rng.choice(_ANALYSIS_SETS)}")
    if kind == 1:
        return (f"proportion of participants with sustained {measure} response "
                f"at month {rng.randrange(1, 49)} {rng.choice(_ANALYSIS_SETS)}")
    if kind == 2:
        return (f"time to improvement in {measure} through month "
                f"{rng.randrange(3, 49)} {rng.choice(_ANALYSIS_SETS)}")
    if kind == 3:
        return (f"percent change in {measure} from baseline to "
                f"month {rng.randrange(1, 49)} {rng.choice(_ANALYSIS_SETS)}")
    if kind == 4:
        return (f"area under the curve for {measure} from month "
                f"{rng.randrange(1, 12)} to month {rng.randrange(12, 49)}")
    return (f"cumulative incidence of {measure} events through month "
            f"{rng.randrange(3, 49)} {rng.choice(_ANALYSIS_SETS)}")


def _unique_oep(rng: random.Random, measure: str) -> str:
    kind = rng.randrange(3)
    if kind == 0:
        return f"exploratory analysis of {measure} at day {rng.randrange(7, 181)}"
    if kind == 1:
        return f"observed change in {measure} at day {rng.randrange(7, 181)}"
    return f"correlation of {measure} with biomarker levels at day {rng.randrange(7, 181)}"


def _title(rng: random.Random, area: str, drug: str, measure: str) -> str:
    pattern = rng.randrange(3)
    pop = rng.choice(POPULATIONS)
    if pattern == 0:
        return (f"a randomized study of {drug} in {pop} with {area}: "
                f"effect on {measure}")
    if pattern == 1:
        return (f"efficacy and safety of {drug} for {area} in {pop} "
                f"measured by {measure}")
    return (f"{drug} versus placebo in {pop} with {area}: "
            f"a trial of {measure}")


def generate_synthetic_corpus(
    seed: int, n_trials: int, start_index: int = 0
) -> list[TrialRecord]:
    """Deterministic corpus of interventional drug trials. ``start_index``
    offsets the registry ids so separately generated corpora stay disjoint."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = random.Random(seed)
    catalogs = _catalogs(n_trials)
    area_labels = [a for a, _ in AREAS]
    area_weights = [w for _, w in AREAS]
    banks = {
        kind: {area: _shared_banks(kind, area, AREA_MEASURES[area]) for area in area_labels}
        for kind in _SHARED_BANK_SIZES
    }

    records = []
    condition_cursor = 0
    for i in range(n_trials):
        area = rng.choices(area_labels, weights=area_weights, k=1)[0]
        measures = AREA_MEASURES[area]
        primary_measure = rng.choice(measures)

        n_drugs = 1 + _poisson(rng, 0.78)
        drugs = [rng.choice(catalogs["drugs"]) for _ in range(n_drugs)]
        interventions = []
        for drug in dict.fromkeys(drugs):
            moas, targets = catalogs["annotations"].get(drug, ([], []))
            interventions.append(
                Intervention(
                    name=drug,
                    concept_id=f"D{_stable_digits(drug, 7)}",
                    targets=list(targets),
                    moas=list(moas),
                )
            )

        conditions = [Condition(name=area, concept_id=f"C{_stable_digits(area, 7)}")]
        for _ in range(_poisson(rng, 0.88)):
            # sweep the catalog once before sampling freely so small corpora
            # still cover their scaled condition pool
            if condition_cursor < len(catalogs["conditions"]):
                name = catalogs["conditions"][condition_cursor]
                condition_cursor += 1
            else:
                name = rng.choice(catalogs["conditions"])
            conditions.append(Condition(name=name, concept_id=f"C{_stable_digits(name, 7)}"))

        n_countries = min(1 + _poisson(rng, 1.9), len(catalogs["countries"]), 8)
        countries = rng.sample(catalogs["countries"], n_countries)

        icr = [_unique_icr(rng, area, measures) for _ in range(1 + _poisson(rng, 5.33))]
        icr += rng.sample(banks["icr"][area], min(_poisson(rng, 1.2), len(banks["icr"][area])))
        ecr = [_unique_ecr(rng, area, measures) for _ in range(1 + _poisson(rng, 8.2))]
        ecr += rng.sample(banks["ecr"][area], min(_poisson(rng, 1.5), len(banks["ecr"][area])))

        pep = [_unique_pep(rng, primary_measure)]
        pep += [_unique_pep(rng, rng.choice(measures)) for _ in range(_poisson(rng, 0.45))]
        pep += rng.sample(banks["pep"][area], min(_poisson(rng, 0.24), len(banks["pep"][area])))
        sep = [_unique_sep(rng, rng.choice(measures)) for _ in range(_poisson(rng, 4.7))]
        sep += rng.sample(banks["sep"][area], min(_poisson(rng, 0.8), len(banks["sep"][area])))
        oep = [_unique_oep(rng, rng.choice(measures)) for _ in range(_poisson(rng, 0.295))]

        gender = "" if rng.random() < 0.002 else rng.choices(GENDERS, weights=[80, 12, 8], k=1)[0]

        records.append(
            TrialRecord(
                nct_id=f"NCT{start_index + i:08d}",
                brief_title=_title(rng, area, drugs[0], primary_measure),
                study_type="interventional",
                intervention_types={"Drug"},
                phase=rng.choice(PHASES),
                overall_status=rng.choice(STATUSES),
                gender=gender,
                age_groups=[rng.choice(AGE_GROUPS)],
                countries=countries,
                conditions=conditions,
                interventions=interventions,
                inclusion_criteria=icr,
                exclusion_criteria=ecr,
                primary_endpoints=pep,
                secondary_endpoints=sep,
                other_endpoints=oep,
                disease_area=area,
            )
        )
    return records
