"""Bundled demo project: a small synthetic corpus over three disciplines, a
scripted deterministic responder standing in for the generation model, and a
builder that records the responder's outputs into a strict replay fixture.

The demo corpus embeds two fully specified reference mechanisms (chromatin
activation in biology, electrolysis in chemistry) whose extracted ids and
terms are pinned by tests, plus two physics items (Fresnel zones, curved rod
equilibrium) that the canned predictions get wrong so the debug cycle has
real errors to repair.
"""

from __future__ import annotations

import hashlib
import json
import re
import shutil
import tempfile
from pathlib import Path
from typing import Optional

from .backend import PromptRequest, RecordingBackend, extract_json_payload
from .ioutils import write_jsonl
from .project import Project

PREDICATES = ("leads to", "results in", "is followed by", "causes")
CONCEPT_TYPES = ("Process", "Mechanism", "Physical Quantity", "Structure")

# Items the canned predictions answer incorrectly, two per discipline.
WRONG_ITEMS = ("item-100003", "item-100007", "item-110002", "item-110006", "item-610002", "item-610005")

DEMO_CONFIG_OVERRIDES = {
    "per_cid_quota": "120",
    "window": "8",
    "stride": "8",
}


def _h(text: str) -> int:
    return int(hashlib.sha1(text.encode("utf-8")).hexdigest()[:8], 16)


def _strip_step(step: str) -> str:
    return re.sub(r"^\s*\d+\.\s*", "", step).rstrip(". ")


# --------------------------------------------------------------------------
# demo corpus
# --------------------------------------------------------------------------

BIOLOGY_ANCHOR_STEPS = [
    "1. Histone proteins (H3, H4) undergo acetylation, phosphorylation, or methylation.",
    "2. Acetylation reduces the net positive charge of the histone octamer.",
    "3. Weakened electrostatic attraction loosens the nucleosome structure.",
    "4. HMG14/17 target nucleosome entry/exit points.",
    "5. HMG proteins displace histone H1.",
    "6. Chromatin transitions to an open, single-fiber configuration.",
    "7. DNA becomes DNase I sensitive/hypersensitive.",
    "8. RNA polymerase accesses the promoter and begins mRNA synthesis.",
]

CHEMISTRY_ANCHOR_STEPS = [
    "1. Dissociation of the electrolyte into mobile cations and anions.",
    "2. Application of external voltage to establish an internal electric field.",
    "3. Directional migration of ions toward electrodes.",
    "4. Competitive selection of ions for discharge based on the electrochemical series.",
    "5. Reduction of cations at the cathode.",
    "6. Oxidation of anions at the anode.",
    "7. Secondary reactions between discharge products and surroundings.",
    "8. Generation of polarization EMF opposing external current.",
    "9. Electron transfer where total charge determines reaction extent.",
    "10. Deposition per Faraday's Laws.",
]


def _topic(title, summary, pre, exc, steps):
    return {"title": title, "summary": summary, "pre": pre, "exc": exc, "steps": steps}


def _steps(*texts):
    return [f"{i + 1}. {t}" for i, t in enumerate(texts)]


PHYSICS_TOPICS = [
    _topic(
        "Double-Slit Interference of Coherent Light",
        "How coherent illumination of two slits builds a stationary fringe pattern.",
        ["The two sources must be mutually coherent", "Slit separation must be comparable to the wavelength"],
        ["Does not apply to incoherent thermal sources", "Fringe visibility is not preserved under white light"],
        _steps(
            "A monochromatic wavefront reaches both slits in phase",
            "Each slit re-radiates a cylindrical secondary wavelet",
            "The two wavelets overlap in the region beyond the barrier",
            "Path-length differences set the relative phase at each screen point",
            "Phase differences of whole wavelengths produce constructive reinforcement",
            "Half-wavelength offsets produce destructive cancellation",
            "A stationary pattern of bright and dark fringes forms on the screen",
        ),
    ),
    _topic(
        "Image Formation by a Converging Lens",
        "The refraction sequence that maps an object plane onto an image plane.",
        ["The lens must be thin relative to the focal length", "Object distance must exceed the focal length for a real image"],
        ["Does not hold near the lens rim where aberrations dominate"],
        _steps(
            "Rays diverge from a single object point toward the lens",
            "The curved interfaces refract each ray toward the axis",
            "Refraction imposes a phase delay growing with thickness at the centre",
            "The delayed wavefront converges behind the lens",
            "Converging rays intersect at a conjugate image point",
            "Point-by-point convergence assembles a complete inverted image",
        ),
    ),
    _topic(
        "Fresnel Half-Wave Zone Analysis of Single-Slit Diffraction",
        "Why dividing a slit into half-wave zones predicts bright and dark diffraction fringes.",
        ["The observation angle must define an integral or half-integral zone count", "The slit must be illuminated by a plane wave"],
        ["Pairwise zone cancellation does not mean the total intensity is zero for odd zone counts", "An uncancelled zone is not equivalent to a full open slit"],
        _steps(
            "The slit aperture is divided into Fresnel half-wave zones at the chosen angle",
            "Adjacent zones contribute wavelets differing by half a wavelength in path",
            "Wavelets from adjacent zones cancel pairwise",
            "An even zone count leaves no uncancelled contribution and yields a dark fringe",
            "An odd zone count leaves one uncancelled zone radiating to the screen",
            "The single uncancelled zone produces a weak bright fringe",
            "Fringe intensity falls as the uncancelled zone's fractional area shrinks",
        ),
    ),
    _topic(
        "Doppler Shift for a Moving Acoustic Source",
        "How source motion compresses and dilutes wavefront spacing.",
        ["The medium itself must be at rest", "Source speed must stay below the wave speed"],
        ["Does not describe the relativistic optical case"],
        _steps(
            "The moving source emits successive wavefronts from displaced positions",
            "Wavefronts ahead of the source become crowded together",
            "Crowding shortens the effective wavelength ahead of the motion",
            "A stationary observer ahead receives crests at a higher rate",
            "The received frequency rises above the emitted frequency",
            "Behind the source the spacing widens and the pitch drops",
        ),
    ),
    _topic(
        "Standing Waves on a Clamped String",
        "The reflection and superposition cycle that locks a string into discrete modes.",
        ["Both ends must be fixed", "Driving must persist long enough for the pattern to stabilize"],
        ["Does not apply while transients still propagate"],
        _steps(
            "A travelling wave reflects at the fixed boundary with inverted phase",
            "The reflected wave superposes with the incoming wave",
            "Superposition cancels motion at points spaced half a wavelength apart",
            "Persistent cancellation pins the nodes in place",
            "Between nodes the displacements reinforce into antinodes",
            "Only wavelengths fitting the clamped length survive as resonant modes",
        ),
    ),
    _topic(
        "Adiabatic Cooling in a Rising Air Parcel",
        "Why unsaturated air cools as it ascends without exchanging heat.",
        ["Ascent must be fast enough to neglect heat exchange"],
        ["Does not apply once condensation releases latent heat"],
        _steps(
            "A buoyant parcel rises into lower ambient pressure",
            "The pressure drop lets the parcel expand against its surroundings",
            "Expansion performs mechanical work on the surrounding air",
            "The work drains the parcel's internal energy",
            "Falling internal energy lowers the parcel temperature",
            "The parcel keeps cooling at the dry adiabatic rate while unsaturated",
        ),
    ),
    _topic(
        "Equilibrium Equations for a Curved Slender Rod",
        "The derivation mechanism that balances forces and moments along a curved rod element.",
        ["The rod cross-section must stay small against the curvature radius", "Loads must vary smoothly along the arc"],
        ["The derivation does not require the rod material to be elastic", "Distributed moments are not negligible on strongly curved segments"],
        _steps(
            "An infinitesimal rod element is cut out along the curved axis",
            "Internal forces on the two cut faces are expressed in the local frame",
            "The local frame rotates along the arc, coupling force components",
            "Force balance on the element yields a vector differential equation",
            "Moment balance adds the couple produced by the shear force offset",
            "Curvature terms enter through the rotation of the local frame",
            "The coupled equations specialize to straight-rod form when curvature vanishes",
        ),
    ),
    _topic(
        "Charging a Capacitor Through a Resistor",
        "The feedback sequence that makes capacitor charging exponential.",
        ["The source voltage must stay constant during charging"],
        ["Does not describe inductive circuits where current cannot jump"],
        _steps(
            "Closing the switch applies the full source voltage across the resistor",
            "The initial voltage difference drives the maximum charging current",
            "Arriving charge raises the capacitor plate voltage",
            "The rising plate voltage reduces the voltage left across the resistor",
            "The reduced resistor voltage lowers the charging current",
            "The shrinking current makes further charging progressively slower",
            "Charge approaches its final value along an exponential curve",
        ),
    ),
    _topic(
        "A Reader's Tour of Famous Physics Demonstrations (introductory survey)",
        "A light narrative stroll through well-known classroom demonstrations.",
        ["None"],
        ["None"],
        _steps(
            "The pendulum swings and the audience gasps",
            "A plasma globe glows in the dark",
            "The bed of nails surprises everyone",
            "A tuning fork hums against the table",
        ),
    ),
    _topic(
        "Notes on Thermocouple Calibration",
        "A fragmented excerpt of calibration notes with the opening argument missing.",
        ["Reference junction must be held at a known temperature"],
        ["Not valid outside the calibrated range"],
        _steps(
            "so the junction voltage is recorded at each bath setpoint",
            "The recorded pairs are fitted against the reference polynomial",
            "Deviations from the fit flag sensor drift",
            "Drifting sensors are re-annealed or retired",
        ),
    ),
]

BIOLOGY_TOPICS = [
    _topic(
        "Osmotic Water Movement Across a Membrane",
        "The solute-gradient mechanism that drives net water flux into a cell.",
        ["The membrane must be permeable to water but not to the solute"],
        ["Does not involve active transport or metabolic energy"],
        _steps(
            "A solute concentration difference forms across the membrane",
            "Water's chemical potential drops on the concentrated side",
            "Random water traffic becomes biased toward the concentrated side",
            "Net water influx swells the concentrated compartment",
            "Swelling builds hydrostatic pressure against the membrane",
            "Rising pressure opposes further influx until flows balance",
        ),
    ),
    _topic(
        "Action Potential Propagation Along an Axon",
        "The regenerative depolarization wave that carries a neural impulse.",
        ["Resting potential must be established by the sodium-potassium pump", "Sodium channels must be recovered from inactivation"],
        ["Does not travel backwards through refractory membrane"],
        _steps(
            "A local stimulus depolarizes the membrane past threshold",
            "Voltage-gated sodium channels open at the stimulated patch",
            "Sodium influx drives the patch further positive",
            "Local currents depolarize the neighbouring membrane",
            "The neighbouring patch reaches threshold and regenerates the spike",
            "Sodium channel inactivation silences the patch just behind",
            "The refractory wake forces one-way propagation",
        ),
    ),
    _topic(
        "Lagging Strand Synthesis at the Replication Fork",
        "Why one daughter strand is stitched together from short fragments.",
        ["Helicase must keep unwinding the parental duplex", "Primase must lay fresh RNA primers"],
        ["The leading strand does not require repeated priming"],
        _steps(
            "Helicase unwinds the duplex and exposes the lagging template",
            "Primase deposits a short RNA primer on the exposed template",
            "DNA polymerase extends the primer away from the fork",
            "Fork progression exposes new template behind the polymerase",
            "The polymerase releases and restarts at the newer primer",
            "Repeated restarts leave a series of short fragments",
            "Ligase seals the fragments into a continuous strand",
        ),
    ),
    _topic(
        "Light Reactions of Photosynthesis",
        "The electron transport cascade that converts photon capture into chemical gradients.",
        ["Thylakoid membranes must be intact", "Light must reach the antenna pigments"],
        ["Carbon fixation itself does not occur in this stage"],
        _steps(
            "Antenna pigments absorb photons and funnel excitation to the reaction centre",
            "The excited reaction centre ejects a high-energy electron",
            "The electron hops down the transport chain between photosystems",
            "Electron transit pumps protons into the thylakoid lumen",
            "The proton gradient drives ATP synthase rotation",
            "Rotation phosphorylates ADP into ATP",
            "Terminal electrons reduce NADP+ to NADPH for the dark reactions",
        ),
    ),
    _topic(
        "Cooperative Oxygen Binding by Hemoglobin",
        "How binding at one heme site reshapes the rest of the tetramer.",
        ["The tetramer must start in the tense conformation"],
        ["Myoglobin does not display this cooperative transition"],
        _steps(
            "The first oxygen binds a heme iron in the tense state",
            "Binding pulls the iron into the heme plane",
            "The iron movement drags the attached helix",
            "The helix shift loosens contacts between subunits",
            "Loosened contacts flip the tetramer toward the relaxed state",
            "Remaining sites in the relaxed state bind oxygen more readily",
        ),
    ),
    _topic(
        "Caspase Cascade in Apoptosis",
        "The proteolytic amplification chain that commits a cell to die.",
        ["Mitochondrial outer membrane permeabilization must release cytochrome c"],
        ["Necrosis does not proceed through this ordered cascade"],
        _steps(
            "Cytochrome c leaks from the mitochondria into the cytosol",
            "Cytosolic cytochrome c nucleates apoptosome assembly",
            "The apoptosome recruits and activates initiator caspase nine",
            "The initiator cleaves and activates executioner caspases",
            "Executioners multiply the signal by cleaving many substrates",
            "Substrate cleavage dismantles the cytoskeleton and the nuclear lamina",
            "The cell fragments into apoptotic bodies for phagocytosis",
        ),
    ),
    _topic(
        "Mechanism of Eukaryotic Chromatin Activation for Gene Transcription",
        "Chemical modification of histones loosens chromatin so transcription machinery can reach the gene.",
        ["DNA must be packaged into nucleosomes with histones and non-histone proteins",
         "Presence of modification enzymes such as acetyltransferases",
         "Availability of HMG proteins (HMG14/17) for H1 displacement"],
        ["Does NOT occur in prokaryotes where DNA is directly accessible",
         "DNase I sensitivity does NOT necessarily mean the gene is currently being transcribed",
         "HMG proteins do NOT inhibit but rather activate the template"],
        BIOLOGY_ANCHOR_STEPS,
    ),
    _topic(
        "Sliding Filament Cycle in Muscle Contraction",
        "The crossbridge sequence that converts ATP into filament sliding.",
        ["Calcium must expose the actin binding sites", "ATP must be available to release the crossbridge"],
        ["Rigor does not represent a normal cycle stage"],
        _steps(
            "Calcium binds troponin and rolls tropomyosin off the binding sites",
            "Energized myosin heads attach to exposed actin",
            "Phosphate release triggers the power stroke",
            "The stroke drags the thin filament toward the sarcomere centre",
            "Fresh ATP binding releases the spent crossbridge",
            "ATP hydrolysis re-cocks the head for the next cycle",
        ),
    ),
    _topic(
        "Milestones of Cell Biology (introductory survey)",
        "A friendly chronological walk through discoveries about the cell.",
        ["None"],
        ["None"],
        _steps(
            "Hooke names the cell after monastery rooms",
            "Microscopes improve and organelles appear",
            "The cell theory is written down",
            "Modern imaging makes living cells watchable",
        ),
    ),
    _topic(
        "Laboratory Notes on Glycolysis Assays",
        "A fragmented excerpt of assay notes cut off mid-derivation.",
        ["Substrate stocks must be fresh"],
        ["Not applicable to whole-tissue extracts"],
        _steps(
            "and the NADH signal is read at 340 nanometres",
            "The slope of the absorbance trace tracks enzyme velocity",
            "Velocities are compared across substrate dilutions",
            "The comparison fixes the kinetic constants",
        ),
    ),
]

CHEMISTRY_TOPICS = [
    _topic(
        "Mechanism and Quantitative Laws of Electrolysis",
        "Electrolysis converts electrical energy into chemical change through directed ion migration and discharge, ending in deposition governed by Faraday's Laws.",
        ["Electrolyte must be in a liquid state to allow ion mobility",
         "External DC source must exceed the decomposition potential",
         "Electrodes must be immersed in the electrolyte"],
        ["Unlike galvanic cells, electrolysis requires external energy input",
         "Does not occur in solid-state electrolytes where ions are locked in a rigid lattice",
         "Metal ion discharge is not guaranteed if hydrogen ions have a significantly lower discharge potential"],
        CHEMISTRY_ANCHOR_STEPS,
    ),
    _topic(
        "Spontaneous Current in a Galvanic Cell",
        "How separated half-reactions push electrons through an external circuit.",
        ["The two half-cells must be joined by a salt bridge", "Electrode potentials must differ"],
        ["Does not require an external voltage source"],
        _steps(
            "The more active metal oxidizes and releases electrons at the anode",
            "Released electrons travel through the external wire",
            "Arriving electrons reduce cations at the cathode surface",
            "Ion depletion charges the half-cell solutions oppositely",
            "Salt bridge ions migrate to neutralize the charge build-up",
            "Sustained neutralization keeps the current flowing until a reactant depletes",
        ),
    ),
    _topic(
        "Equilibrium Shift Under Concentration Stress",
        "The relaxation sequence behind Le Chatelier's principle.",
        ["The system must start at dynamic equilibrium", "Temperature must stay constant"],
        ["Adding an inert gas at constant volume does not shift the position"],
        _steps(
            "An added reactant raises its instantaneous concentration",
            "The forward rate rises above the reverse rate",
            "Net forward conversion consumes the added reactant",
            "Product concentrations climb as conversion proceeds",
            "The reverse rate grows with the accumulating products",
            "Rates re-equalize at a new composition favouring products",
        ),
    ),
    _topic(
        "Backside Attack in an SN2 Substitution",
        "The single concerted step that inverts a stereocentre.",
        ["The substrate carbon must be sterically accessible", "The nucleophile must be strong"],
        ["Does not proceed through a free carbocation"],
        _steps(
            "The nucleophile approaches the carbon opposite the leaving group",
            "Electron density flows into the carbon-leaving-group antibonding orbital",
            "The weakening bond lengthens as the new bond forms",
            "A trigonal bipyramidal transition state holds both partial bonds",
            "The leaving group departs with the bonding electrons",
            "The remaining substituents snap through to the inverted geometry",
        ),
    ),
    _topic(
        "Buffering Action Near the Equivalence Point",
        "Why a weak-acid buffer resists pH swings until it is overwhelmed.",
        ["Comparable amounts of the weak acid and its conjugate base must coexist"],
        ["A strong-acid solution alone does not buffer"],
        _steps(
            "Added hydroxide reacts with the weak acid reservoir",
            "The reaction converts acid molecules into conjugate base",
            "The acid-base ratio changes only slightly while both remain plentiful",
            "The logarithmic pH relation damps the ratio change further",
            "Continued addition eventually exhausts the acid reservoir",
            "Past exhaustion each drop of base moves the pH sharply",
        ),
    ),
    _topic(
        "Radical Chain Polymerization",
        "The initiation-propagation-termination cycle that grows polymer chains.",
        ["An initiator must decompose into radicals", "Monomer must carry a polymerizable double bond"],
        ["Step-growth polymerization does not involve radical carriers"],
        _steps(
            "Heat splits the initiator into a pair of radicals",
            "A radical adds across a monomer double bond",
            "The addition regenerates a radical at the chain end",
            "The chain-end radical keeps adding monomers in sequence",
            "Two growing chain ends eventually meet",
            "Radical recombination terminates both chains at once",
        ),
    ),
    _topic(
        "Vapor Pressure Lowering by a Nonvolatile Solute",
        "The surface-population argument behind Raoult's law.",
        ["The solute must be nonvolatile and non-dissociating"],
        ["Does not apply to volatile solute mixtures"],
        _steps(
            "Dissolved solute particles occupy part of the liquid surface",
            "Fewer solvent molecules sit at the escape interface",
            "The evaporation rate drops below the pure-solvent rate",
            "Condensation overtakes evaporation at the old pressure",
            "Net condensation lowers the vapor density",
            "A new balance settles at a reduced equilibrium vapor pressure",
        ),
    ),
    _topic(
        "Three-Way Catalytic Conversion of Exhaust",
        "The coupled surface reactions that clean combustion exhaust.",
        ["The catalyst must reach its light-off temperature", "The air-fuel ratio must stay near stoichiometric"],
        ["A cold catalyst does not convert start-up emissions"],
        _steps(
            "Exhaust species adsorb onto the precious-metal surface",
            "Adsorbed carbon monoxide meets dissociated surface oxygen",
            "Surface oxidation converts the monoxide to carbon dioxide",
            "Nitric oxide dissociates on neighbouring metal sites",
            "Liberated nitrogen atoms pair and desorb as dinitrogen",
            "Freed surface sites adsorb the next wave of exhaust species",
        ),
    ),
    _topic(
        "Great Moments in Chemistry (introductory survey)",
        "A breezy look at beloved chemistry stories.",
        ["None"],
        ["None"],
        _steps(
            "Alchemists chase gold and find phosphorus",
            "Mendeleev dreams of a table",
            "A mold contaminates a dish and saves millions",
            "Buckyballs roll into the textbooks",
        ),
    ),
    _topic(
        "Bench Notes on Distillation Runs",
        "A fragmented excerpt of distillation notes missing its setup.",
        ["Column packing must be conditioned"],
        ["Not meaningful for azeotropic mixtures"],
        _steps(
            "then the head temperature is logged at each cut",
            "Cuts are assayed for the light component",
            "Assays locate the steady-state composition profile",
            "The profile sets the optimal reflux ratio",
        ),
    ),
]

DISCIPLINES = [
    ("001", "1000", PHYSICS_TOPICS),
    ("006", "1100", BIOLOGY_TOPICS),
    ("007", "6100", CHEMISTRY_TOPICS),
]


def make_docs() -> list[dict]:
    docs = []
    for cid, prefix, topics in DISCIPLINES:
        for n, topic in enumerate(topics, start=1):
            body_lines = [
                f"{topic['title']}: {topic['summary']}",
                "Preconditions: " + "; ".join(topic["pre"]) + ".",
                "Exclusions: " + "; ".join(topic["exc"]) + ".",
                *topic["steps"],
            ]
            docs.append({
                "doc_id": f"doc-{prefix}{n:02d}",
                "title": topic["title"],
                "summary": topic["summary"],
                "text": "\n".join(body_lines),
                "cid": cid,
            })
    return docs


# --------------------------------------------------------------------------
# scripted responder
# --------------------------------------------------------------------------

# Pinned extraction results for the two reference mechanisms; everything else
# follows the generic rules.
STATEMENT_OVERRIDES = {
    "chain-110007": {
        "id_style": "index",
        "entries": {
            0: {
                "statement_id": "stmt-chain-110007-000",
                "subject": "Histone proteins (H3 and H4)",
                "predicate": "undergo chemical modifications including",
                "object": "acetylation of lysine/arginine residues",
            },
        },
    },
    "chain-610001": {
        "id_style": "target",
        "entries": {
            2: {
                "statement_id": "stmt-610001-003",
                "subject": "Directional migration of ions toward the electrodes",
                "predicate": "leads to the",
                "object": "Competitive selection of ions for discharge based on the electrochemical series",
            },
        },
    },
}

CONCEPT_OVERRIDES = {
    "histone proteins (h3 and h4)": {
        "concept_id": "concept-128465",
        "term": "Histone Proteins (H3 and H4)",
        "type": "Protein",
        "definition": (
            "Highly alkaline proteins that package and order DNA into structural units; "
            "H3 and H4 form the core of the nucleosome and are targets for chemical modifications."
        ),
    },
}

ITEM_OVERRIDES = {
    "chain-100003": {
        "question": (
            "In the analysis method of Fresnel half-wave strips for single-slit Fraunhofer diffraction, "
            "the slit is divided into half-wave zones whose wavelets cancel pairwise, so the residual "
            "light reaching the screen is set by whatever zone remains uncancelled. Which of the "
            "following statements about the formation of bright and dark fringes are correct?"
        ),
        "options": {
            "A": "When the observation angle divides the slit into an even number of half-wave zones, pairwise cancellation is complete and a dark fringe forms.",
            "B": "When the zone count is odd, exactly one uncancelled zone radiates to the screen and produces a weak bright fringe.",
            "C": "The uncancelled zone contributes the same intensity as the fully open slit, so all bright fringes share the central maximum's brightness.",
            "D": "Bright-fringe intensity falls off as the uncancelled zone's fractional area of the slit shrinks at larger angles.",
        },
        "answer": "A,B,D",
        "explanation": (
            "Even zone counts cancel completely (A) while odd counts leave one radiating zone (B), whose "
            "shrinking fractional area dims successive maxima (D). Option C conflates the single "
            "uncancelled zone with the whole aperture, which overstates the off-centre intensity."
        ),
    },
    "chain-100007": {
        "question": (
            "According to the derivation mechanism of the equilibrium equations for a curved slender rod, "
            "an infinitesimal element is cut from the curved axis, internal forces are written in the "
            "local frame, and force and moment balances are combined. Which of the following statements "
            "about the prerequisites and structure of the derivation are correct?"
        ),
        "options": {
            "A": "The rod cross-section must remain small against the curvature radius for the slender-rod element analysis to hold.",
            "B": "Curvature enters the balance equations through the rotation of the local frame along the arc, coupling the force components.",
            "C": "The moment balance must include the couple produced by the shear force offset across the element.",
            "D": "The derivation additionally requires the rod material to be linearly elastic before any balance can be written.",
        },
        "answer": "A,B,C",
        "explanation": (
            "Slenderness (A), frame rotation coupling (B), and the shear couple (C) are the load-bearing "
            "ingredients of the balance; material elasticity (D) only enters later constitutive relations, "
            "not the equilibrium statements themselves."
        ),
    },
}

DIAGNOSIS_OVERRIDES = [
    {
        "needle": "Fresnel half-wave",
        "issue_type": "concept_gap",
        "key_concept": "Interference in diffraction patterns",
        "reasoning": (
            "The model incorrectly included option C, indicating a misunderstanding of the specific "
            "conditions required for the formation of bright and dark fringes."
        ),
        "recommendation": "Review the principles of diffraction and interference.",
        "confidence": 0.9,
    },
    {
        "needle": "curved slender rod",
        "issue_type": "capability_deficit",
        "key_concept": "Equilibrium equations for curved slender rods",
        "reasoning": (
            "The model incorrectly included option D, indicating a failure to accurately assess the "
            "prerequisites for the equilibrium equations."
        ),
        "recommendation": "Enhance multi-step reasoning over derivation prerequisites.",
        "confidence": 0.85,
    },
]


class ScriptedBackend:
    """Deterministic rule-based stand-in for the generation model.

    Responses are pure functions of the request text, so recording a run
    yields a replayable fixture and re-recording yields identical bytes.
    """

    def complete(self, request: PromptRequest) -> str:
        tag = request.tag
        text = request.user_text
        if tag == "triage":
            return self._triage(text)
        if tag == "chunk_score":
            return self._chunk_score(text)
        if tag == "extract_chain":
            return self._extract_chain(text)
        if tag == "decompose":
            return self._decompose(text)
        if tag == "harvest":
            return self._harvest(text)
        if tag == "bench_item":
            return self._bench_item(text)
        if tag == "sft_qa":
            return self._sft_qa(text)
        if tag == "sft_choice":
            return self._sft_choice(text)
        if tag == "sft_tf":
            return self._sft_tf(text)
        if tag == "diagnose":
            return self._diagnose(text)
        if tag.startswith("patch_"):
            return self._patch(tag, text)
        raise ValueError(f"scripted backend has no rule for tag {tag!r}")

    # -- curation ---------------------------------------------------------

    def _triage(self, text: str) -> str:
        title = re.search(r"Title: (.*)", text).group(1)
        h = _h(title)
        if "(introductory survey)" in title:
            payload = {
                "domains": ["other"],
                "level": "introductory",
                "reasoning_type": "descriptive",
                "keep": False,
                "confidence": 0.9,
            }
        else:
            payload = {
                "domains": [("physics", "chemistry", "biology", "engineering")[h % 4]],
                "level": ("undergraduate", "graduate", "research")[h % 3],
                "reasoning_type": ("conceptual", "mathematical", "experimental", "procedural")[h % 4],
                "keep": True,
                "confidence": round(0.75 + (h % 20) / 100, 2),
            }
        return json.dumps(payload)

    def _chunk_score(self, text: str) -> str:
        passage = text.split("Passage:", 1)[1]
        h = _h(passage)
        smooth = 3 if "fragmented excerpt" in passage.lower() else 4 + h % 2
        payload = {
            "reasoning_depth": 4 + (h >> 1) % 2,
            "prerequisite_density": 4 + (h >> 2) % 2,
            "scenario_applicability": 4 + (h >> 3) % 2,
            "counter_intuitive_index": 4 + (h >> 4) % 2,
            "knowledge_synthesis": 4 + (h >> 5) % 2,
            "breakpoint_smoothness": smooth,
        }
        return json.dumps(payload)

    # -- extraction -------------------------------------------------------

    def _extract_chain(self, text: str) -> str:
        passage = text.split("Passage:", 1)[1].split("Answer with", 1)[0].strip()
        lines = [l.strip() for l in passage.splitlines() if l.strip()]
        header = lines[0]
        process_name, _, narrative = header.partition(": ")
        pre: list[str] = []
        exc: list[str] = []
        steps: list[str] = []
        for line in lines[1:]:
            if line.startswith("Preconditions:"):
                pre = [p.strip().rstrip(".") for p in line[len("Preconditions:"):].split(";") if p.strip()]
            elif line.startswith("Exclusions:"):
                exc = [p.strip().rstrip(".") for p in line[len("Exclusions:"):].split(";") if p.strip()]
            elif re.match(r"^\d+\.", line):
                steps.append(line)
        payload = [{
            "chain_id": "chain-000",
            "domain_context": f"Technical mechanism: {process_name}",
            "process_name": process_name,
            "narrative_summary": narrative or header,
            "preconditions": pre,
            "negative_constraints": exc,
            "steps": steps,
        }]
        return json.dumps(payload, ensure_ascii=False)

    def _decompose(self, text: str) -> str:
        chain = extract_json_payload(text)
        chain_id = chain["chain_id"]
        steps = chain["steps"]
        base = chain_id.removeprefix("chain-")
        tail = int(re.sub(r"\D", "", base) or "0")
        override = STATEMENT_OVERRIDES.get(chain_id, {})
        id_style = override.get("id_style", "index")
        entries = override.get("entries", {})

        links = len(steps) - 1
        skip = tail % links if tail % 3 == 0 and links > 1 else None
        out = []
        for i in range(links):
            if i == skip and i not in entries:
                continue
            subject = _strip_step(steps[i])
            obj = _strip_step(steps[i + 1])
            suffix = i + 1 if id_style == "target" else i
            record = {
                "statement_id": f"stmt-{base}-{suffix:03d}",
                "parent_chain_id": chain_id,
                "subject": subject,
                "predicate": PREDICATES[(tail + i) % len(PREDICATES)],
                "object": obj,
                "source_quote": subject[:60],
            }
            record.update(entries.get(i, {}))
            out.append(record)
        return json.dumps(out, ensure_ascii=False)

    def _harvest(self, text: str) -> str:
        statements = extract_json_payload(text)
        concepts: dict[str, dict] = {}
        order: list[str] = []
        for stmt in statements:
            for role in ("subject", "object"):
                term = stmt[role]
                key = " ".join(term.split()).casefold()
                if key not in concepts:
                    override = CONCEPT_OVERRIDES.get(key)
                    if override:
                        concepts[key] = {
                            "concept_id": override["concept_id"],
                            "term": override["term"],
                            "type": override["type"],
                            "definition": override["definition"],
                            "parent_statement_ids": [],
                        }
                    else:
                        h = _h(key)
                        concepts[key] = {
                            "concept_id": f"concept-{h % 10**6:06d}",
                            "term": term,
                            "type": CONCEPT_TYPES[h % len(CONCEPT_TYPES)],
                            "definition": f"{term[0].upper() + term[1:]}: a step in this mechanism, "
                                          f"linked to its neighbours as described in the source.",
                            "parent_statement_ids": [],
                        }
                    order.append(key)
                if stmt["statement_id"] not in concepts[key]["parent_statement_ids"]:
                    concepts[key]["parent_statement_ids"].append(stmt["statement_id"])

        out = [concepts[key] for key in order]
        # the electrochemical-series framework is named inside a longer
        # phrase; surface it as its own concept like a careful annotator would
        series_parents = [
            s["statement_id"] for s in statements
            if "electrochemical series" in (s["subject"] + " " + s["object"]).casefold()
        ]
        if series_parents:
            out.append({
                "concept_id": "concept-1376",
                "term": "Electrochemical Series",
                "type": "Scientific Framework",
                "definition": (
                    "A sequence of chemical elements or ions arranged by their standard electrode "
                    "potentials, determining the order in which they discharge."
                ),
                "parent_statement_ids": series_parents,
            })
        return json.dumps(out, ensure_ascii=False)

    # -- benchmark and SFT --------------------------------------------------

    def _bench_item(self, text: str) -> str:
        chain = extract_json_payload(text)
        chain_id = chain["chain_id"]
        if chain_id in ITEM_OVERRIDES:
            return json.dumps(ITEM_OVERRIDES[chain_id], ensure_ascii=False)
        steps = [_strip_step(s) for s in chain["steps"]]
        tail = int(re.sub(r"\D", "", chain_id) or "0")
        multi = "multi-select" in text
        name = chain["process_name"]
        question = (
            f"Within the mechanism of {name.lower()}, the pathway runs from the point where "
            f"{steps[0].lower()} to the stage where {steps[-1].lower()}. Considering how each stage "
            f"licenses the next, which of the following statements about '{name}' are correct?"
        )
        options = {
            "A": f"{steps[0]}, and this is what makes it possible that {steps[1].lower()}.",
            "B": f"Only after {steps[-2].lower()} can the final stage, where {steps[-1].lower()}, take place.",
            "C": f"{steps[-1]} occurs first and only afterwards {steps[0].lower()}, reversing the actual order.",
            "D": f"The process completes even if the stage where {steps[1].lower()} is skipped entirely.",
        }
        if multi:
            answer = "A,B"
        else:
            answer = "AB"[tail % 2]
        explanation = (
            f"The stages of {name.lower()} are strictly ordered: options A and B restate real adjacent "
            "dependencies, while C reverses the causal order and D drops a required stage."
        )
        return json.dumps({
            "question": question,
            "options": options,
            "answer": answer,
            "explanation": explanation,
        }, ensure_ascii=False)

    @staticmethod
    def _requested_count(text: str) -> int:
        return int(re.search(r"at least (\d+)", text).group(1))

    def _sft_qa(self, text: str) -> str:
        statements = extract_json_payload(text)
        count = self._requested_count(text)
        out = []
        styles = ("definition", "mechanism", "verification", "function")
        for n in range(count):
            stmt = statements[n % len(statements)]
            out.append({
                "question": f"In this mechanism, what does the stage where {stmt['subject'].lower()} "
                            f"bring about, and why does it matter? (angle {n % 3 + 1})",
                "answer": f"{stmt['subject']} {stmt['predicate']} {stmt['object']}. This link matters because "
                          f"the downstream stage depends on it directly; removing it stalls the mechanism.",
                "l2_statement_id": stmt["statement_id"],
                "linked_concepts": [],
                "question_style": styles[n % len(styles)],
            })
        return json.dumps(out, ensure_ascii=False)

    def _sft_choice(self, text: str) -> str:
        statements = extract_json_payload(text)
        count = self._requested_count(text)
        ratio = float(re.search(r"roughly (\d+)% single-choice", text).group(1)) / 100
        singles = round(count * ratio)
        out = []
        for n in range(count):
            stmt = statements[n % len(statements)]
            other = statements[(n + 1) % len(statements)]
            options = [
                f"{stmt['predicate']} {stmt['object']}",
                f"{other['predicate']} {other['object']}",
                f"has no downstream effect in this mechanism",
                f"reverses the preceding stage entirely",
            ]
            if n < singles:
                entry = {
                    "question": f"Which outcome follows the stage where {stmt['subject'].lower()}?",
                    "options": options,
                    "answer": "A",
                    "question_type": "single_choice",
                    "explanation": f"The source material states that {stmt['subject'].lower()} "
                                   f"{stmt['predicate']} {stmt['object'].lower()}.",
                    "l2_statement_ids": [stmt["statement_id"]],
                    "linked_concepts": [],
                }
            else:
                entry = {
                    "question": f"Which of the following are true of the stage where {stmt['subject'].lower()}? "
                                f"(Select all that apply)",
                    "options": options,
                    "answer": ["A", "B"] if other is not stmt else ["A"],
                    "question_type": "multiple_choice",
                    "explanation": "Options A and B restate documented links; C and D contradict the "
                                   "recorded order of stages.",
                    "l2_statement_ids": sorted({stmt["statement_id"], other["statement_id"]}),
                    "linked_concepts": [],
                }
            out.append(entry)
        return json.dumps(out, ensure_ascii=False)

    def _sft_tf(self, text: str) -> str:
        statements = extract_json_payload(text)
        count = self._requested_count(text)
        ratio = float(re.search(r"roughly (\d+)% true", text).group(1)) / 100
        trues = round(count * ratio)
        out = []
        for n in range(count):
            stmt = statements[n % len(statements)]
            if n < trues:
                out.append({
                    "statement": f"{stmt['subject']} {stmt['predicate']} {stmt['object']}.",
                    "answer": "true",
                    "question_type": "true_false",
                    "explanation": "This restates the documented link between the two stages.",
                    "l2_statement_ids": [stmt["statement_id"]],
                    "linked_concepts": [],
                })
            else:
                out.append({
                    "statement": f"{stmt['object']} must occur before {stmt['subject'].lower()} can begin.",
                    "answer": "false",
                    "question_type": "true_false",
                    "explanation": "The recorded order is the opposite: the first stage licenses the second.",
                    "l2_statement_ids": [stmt["statement_id"]],
                    "linked_concepts": [],
                })
        return json.dumps(out, ensure_ascii=False)

    # -- debugging ----------------------------------------------------------

    def _diagnose(self, text: str) -> str:
        question = re.search(r"Question: (.*)", text).group(1)
        for override in DIAGNOSIS_OVERRIDES:
            if override["needle"] in question:
                return json.dumps({k: v for k, v in override.items() if k != "needle"})
        chain_id = (re.search(r"Chain id: (\S+)", text) or [None, "chain-0"])[1]
        tail = int(re.sub(r"\D", "", chain_id) or "0")
        quoted = re.search(r"'([^']+)'", question)
        key_concept = quoted.group(1) if quoted else question.split(",")[0][:60]
        issue = "concept_gap" if tail % 2 == 0 else "capability_deficit"
        return json.dumps({
            "issue_type": issue,
            "key_concept": key_concept,
            "reasoning": "The prediction includes an option that contradicts the recorded stage order.",
            "recommendation": "Reinforce the ordered dependencies of this mechanism.",
            "confidence": 0.8,
        })

    def _patch(self, tag: str, text: str) -> str:
        count = int(re.search(r"Generate exactly (\d+)", text).group(1))
        concept = re.search(r"Target concept: (.*)", text).group(1).strip()
        cot = tag.startswith("patch_cot_")
        fmt = tag[len("patch_cot_"):] if cot else tag[len("patch_gap_"):]
        out = []
        for n in range(count):
            if fmt == "open_ended":
                if cot:
                    answer = (
                        f"Step 1: identify what {concept} requires at the outset. "
                        f"Step 2: trace how each stage licenses the next. "
                        f"Therefore: the pathway reaches its documented outcome, variant {n}."
                    )
                    question = f"Walk through, step by step, how {concept} unfolds and justify each hop (case {n})."
                else:
                    answer = (
                        f"{concept} denotes the documented mechanism stage. Its key attributes are the "
                        f"conditions recorded in the source. In application it licenses the following "
                        f"stage, and unlike its neighbouring concepts it does not reverse the order "
                        f"(variant {n})."
                    )
                    question = f"Define {concept} precisely and contrast it with the concepts it is confused with (case {n})."
                out.append({"question": question, "answer": answer})
            elif fmt == "choice":
                out.append({
                    "question": f"In a scenario exercising {concept}, which statements hold? (case {n})",
                    "options": {
                        "A": f"{concept} requires its documented preconditions.",
                        "B": f"{concept} licenses the next stage of the mechanism.",
                        "C": f"{concept} reverses the documented order of stages.",
                        "D": f"{concept} proceeds even when its preconditions fail.",
                    },
                    "answer": "A,B\n\nOptions A and B restate the documented behaviour of "
                              f"{concept}; C reverses the order and D drops the preconditions.",
                })
            else:
                verdict = "A" if n % 2 == 0 else "B"
                claim = (
                    f"{concept} can complete without its documented preconditions."
                    if verdict == "B"
                    else f"{concept} depends on the preconditions recorded in the source."
                )
                out.append({
                    "question": f"{claim} (case {n})",
                    "options": {"A": "True", "B": "False"},
                    "answer": f"{verdict}\n\nThe source records the preconditions explicitly, which "
                              f"settles the claim.",
                })
        return json.dumps(out, ensure_ascii=False)


# --------------------------------------------------------------------------
# demo project builder
# --------------------------------------------------------------------------

def make_predictions(benchmark_records: list[dict]) -> list[dict]:
    """Canned predictions: verbose but correct for most items, one spurious
    extra letter for the designated error items."""
    out = []
    for rec in sorted(benchmark_records, key=lambda r: r["item_id"]):
        truth = ",".join(sorted(rec["answer"]))
        if rec["item_id"] in WRONG_ITEMS:
            letters = sorted(set(rec["answer"]) | ({"C"} if "C" not in rec["answer"] else {"D"}))
            raw = ",".join(letters)
        else:
            raw = f"The answer is {truth}."
        out.append({"item_id": rec["item_id"], "raw_text": raw})
    return out


def demo_config_text(seed: int = 42) -> str:
    from .project import Config

    config = Config()
    config.values["seed"] = str(seed)
    config.values.update(DEMO_CONFIG_OVERRIDES)
    config.values["model_name"] = "demo-model-v1"
    return config.render()


def build_demo_project(root: str | Path, seed: int = 42) -> Project:
    """Create a ready-to-run fixture project: documents, recorded fixture
    script, and round-1 predictions.

    The fixture is authored by replaying the full pipeline once against the
    scripted responder in a scratch directory and recording every
    request/response pair.
    """
    root = Path(root)
    project = Project.init(root, config_text=demo_config_text(seed))
    docs = make_docs()
    write_jsonl(root / "inputs" / "docs.jsonl", docs)

    recorder = RecordingBackend(ScriptedBackend())
    scratch = Path(tempfile.mkdtemp(prefix="corpusloop-demo-"))
    try:
        scratch_project = Project.init(scratch / "p", config_text=demo_config_text(seed))
        write_jsonl(scratch_project.root / "inputs" / "docs.jsonl", docs)
        for stage in ("curate", "extract", "bench"):
            scratch_project.run_stage(stage, backend=recorder)

        benchmark_records = [i.to_record() for i in scratch_project.load_benchmark()]
        predictions = make_predictions(benchmark_records)
        write_jsonl(scratch_project.root / "predictions" / "round-1.jsonl", predictions)
        write_jsonl(root / "predictions" / "round-1.jsonl", predictions)

        for stage in ("synth", "eval", "diagnose", "patch", "mix"):
            scratch_project.run_stage(stage, backend=recorder)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)

    recorder.to_fixture().save(root / "inputs" / "fixtures.json")
    return project
