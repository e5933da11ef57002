//! Regenerates the bundled synthetic dataset under `fixtures/synthetic`.
//!
//! ```text
//! cargo run -p orthodoc-core --example gen_synthetic [out-dir]
//! ```
//!
//! Output is a pure function of the constants below, so rerunning it leaves
//! the committed fixtures unchanged.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use orthodoc_core::case::{CaseRecord, Demographics};
use orthodoc_core::corpus::Document;
use orthodoc_core::kgraph::{EntityType, LexiconEntry, RelType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

const SEED: u64 = 2024;
const CASES_PER_CLASS: usize = 12;
const D: usize = 32;
const P: usize = 16;
const NOISE_SD: f64 = 0.6;

struct ClassSpec {
    label: &'static str,
    histories: &'static [&'static str],
    complaints: &'static [&'static str],
    /// (doc suffix, title, text)
    docs: &'static [(&'static str, &'static str, &'static str)],
}

const CLASSES: &[ClassSpec] = &[
    ClassSpec {
        label: "fracture",
        histories: &[
            "fall on an outstretched hand while cycling",
            "slipped on ice and landed on the wrist",
            "road traffic collision two days ago",
            "twisting injury of the ankle during football",
        ],
        complaints: &[
            "acute wrist pain with swelling and visible deformity",
            "severe pain and swelling over the distal radius after the fall",
            "inability to bear weight with localized bone tenderness",
            "sharp pain, bruising and crepitus over the injured limb",
        ],
        docs: &[
            ("overview", "Fracture overview", "A fracture of the distal radius typically follows a fall on an outstretched hand and produces acute pain, swelling, bruising and visible deformity at the wrist with marked bone tenderness. Elderly patients with osteoporosis are most often affected."),
            ("imaging", "Fracture imaging", "Computed tomography of a suspected fracture shows a cortical break line, fragment displacement, angulation and articular step-off that radiographs may underestimate in complex injuries. Comminution guides the choice of fixation."),
            ("treatment", "Fracture treatment", "Treatment of a displaced fracture involves closed reduction and cast immobilization, while unstable or intra-articular patterns require open reduction and internal fixation with plates and screws. Union usually takes six weeks."),
            ("management", "Fracture management", "Long-term management after a fracture includes graded physiotherapy, restoration of wrist motion and grip strength, and evaluation of bone density to lower the risk of further fragility fractures. Most patients regain function."),
            ("complications", "Fracture complications", "Complications of a fracture include malunion, nonunion, compartment syndrome, median nerve compression and complex regional pain syndrome, which present with persistent pain and stiffness after injury. Early recognition matters."),
        ],
    },
    ClassSpec {
        label: "arthritis",
        histories: &[
            "family history of rheumatoid disease",
            "psoriasis diagnosed ten years ago",
            "recurrent joint flares over several months",
            "previous episode of gout in the big toe",
        ],
        complaints: &[
            "symmetric joint swelling with prolonged morning stiffness",
            "painful swollen knuckles and morning stiffness lasting over an hour",
            "warm swollen knee with synovitis and reduced motion",
            "polyarticular joint pain with fatigue and stiffness",
        ],
        docs: &[
            ("overview", "Arthritis overview", "Inflammatory arthritis such as rheumatoid disease presents with symmetric joint swelling, synovitis, prolonged morning stiffness and fatigue affecting the small joints of the hands and wrists. Serology supports the diagnosis."),
            ("imaging", "Arthritis imaging", "Computed tomography in inflammatory arthritis shows periarticular erosions, joint space narrowing, soft tissue swelling and juxta-articular osteopenia around the affected synovial joints. Erosions indicate active disease."),
            ("treatment", "Arthritis treatment", "Treatment of inflammatory arthritis relies on early disease-modifying antirheumatic drugs such as methotrexate, short courses of corticosteroids and intra-articular joint injection for persistent synovitis. Biologic agents follow failure."),
            ("management", "Arthritis management", "Long-term management of arthritis combines regular rheumatology review, joint protection strategies, exercise therapy and monitoring of drug toxicity with blood tests to preserve joint function. Flares need prompt review."),
            ("course", "Arthritis course", "Untreated inflammatory arthritis progresses to joint destruction, tendon rupture, deformity of the fingers and loss of hand function, with cardiovascular risk also increased by chronic inflammation. Remission is achievable."),
        ],
    },
    ClassSpec {
        label: "tumor",
        histories: &[
            "unexplained weight loss over three months",
            "previous treatment for breast cancer",
            "progressive pain without any injury",
            "adolescent with a growing painful mass",
        ],
        complaints: &[
            "deep night pain in the thigh with a palpable mass",
            "persistent bone pain at night that is not relieved by rest",
            "enlarging firm mass near the knee with night pain",
            "progressive pain, swelling and a lump over the femur",
        ],
        docs: &[
            ("overview", "Bone tumor overview", "A primary bone tumor such as osteosarcoma presents with deep night pain, a firm enlarging mass, swelling and sometimes a pathological fracture, most often around the knee in adolescents. Metastases are more common in adults."),
            ("imaging", "Bone tumor imaging", "Computed tomography of a bone tumor shows an aggressive lytic or sclerotic lesion with cortical destruction, periosteal reaction, a soft tissue mass and matrix mineralization. Staging includes chest imaging."),
            ("treatment", "Bone tumor treatment", "Treatment of a malignant bone tumor requires image-guided biopsy at a specialist centre, neoadjuvant chemotherapy and wide surgical resection with limb salvage reconstruction where feasible. Radiotherapy suits some tumors."),
            ("management", "Bone tumor management", "Long-term management of a bone tumor involves multidisciplinary sarcoma team follow-up, surveillance imaging for local recurrence and lung metastases, and rehabilitation after limb salvage surgery. Survival has improved."),
            ("differential", "Bone lesion differential", "The differential diagnosis of a painful bone lesion includes metastatic carcinoma, myeloma, osteomyelitis, giant cell tumor and benign cysts, distinguished by age, lesion margins and biopsy findings. Histology is decisive."),
        ],
    },
    ClassSpec {
        label: "dislocation",
        histories: &[
            "fall onto the shoulder during rugby",
            "previous shoulder instability episodes",
            "high energy collision while skiing",
            "joint gave way while lifting overhead",
        ],
        complaints: &[
            "sudden shoulder pain with loss of contour and inability to move the arm",
            "deformed painful shoulder held in external rotation",
            "severe joint pain with obvious deformity and locked position",
            "the joint popped out and remains painful with restricted motion",
        ],
        docs: &[
            ("overview", "Dislocation overview", "A shoulder dislocation follows a fall or collision with the arm abducted and externally rotated, causing sudden pain, loss of the normal deltoid contour and inability to move the joint. Anterior dislocation predominates."),
            ("imaging", "Dislocation imaging", "Computed tomography after a dislocation confirms loss of joint congruity and reveals associated Hill-Sachs impaction, glenoid rim fracture and bony Bankart lesions affecting future stability. Nerve injury is assessed clinically."),
            ("treatment", "Dislocation treatment", "Treatment of an acute dislocation is prompt closed reduction under analgesia and sedation, followed by sling immobilization and surgical stabilization for recurrent instability or large bony defects. Reduction is confirmed radiographically."),
            ("management", "Dislocation management", "Long-term management after a dislocation focuses on rotator cuff strengthening, proprioceptive training and gradual return to sport to reduce the high recurrence rate in young athletes. Recurrence declines with age."),
            ("complications", "Dislocation complications", "Complications of a joint dislocation include axillary nerve injury, vascular compromise, recurrent instability, rotator cuff tears and post-traumatic arthritis of the affected joint. Neurovascular status must be documented."),
        ],
    },
    ClassSpec {
        label: "degenerative_disease",
        histories: &[
            "decades of heavy manual labour",
            "obesity and a sedentary lifestyle",
            "gradual pain worsening over several years",
            "previous knee meniscus surgery",
        ],
        complaints: &[
            "chronic knee pain worse with activity and brief morning stiffness",
            "low back pain radiating to the buttock with stiffness",
            "gradually worsening hip pain and reduced walking distance",
            "joint pain on weight bearing with crepitus and stiffness",
        ],
        docs: &[
            ("overview", "Degenerative disease overview", "Degenerative joint disease such as osteoarthritis presents with chronic activity-related pain, brief morning stiffness, crepitus and reduced range of motion in the knee, hip or lumbar spine of older adults. Symptoms fluctuate."),
            ("imaging", "Degenerative disease imaging", "Computed tomography of degenerative disease shows joint space narrowing, subchondral sclerosis, osteophyte formation, subchondral cysts and disc degeneration with facet arthropathy in the spine. Findings correlate loosely with pain."),
            ("treatment", "Degenerative disease treatment", "Treatment of degenerative disease starts with physiotherapy, weight loss, analgesics and corticosteroid injection, while advanced joint destruction with disabling pain warrants total joint replacement. Spinal surgery is selective."),
            ("management", "Degenerative disease management", "Long-term management of degenerative disease emphasizes regular low-impact exercise, muscle strengthening, weight control and walking aids to maintain mobility and independence. Progression is usually slow."),
            ("spine", "Lumbar spondylosis", "Lumbar spondylosis is a degenerative disease of the spine with disc height loss, osteophytes and foraminal stenosis that causes mechanical low back pain and occasional radicular leg symptoms. Red flags require urgent imaging."),
        ],
    },
    ClassSpec {
        label: "normal",
        histories: &[
            "routine review after minor strain",
            "no significant past medical history",
            "recent increase in gym training",
            "mild discomfort after gardening",
        ],
        complaints: &[
            "mild muscular ache after exercise without swelling",
            "minor soft tissue soreness with full range of motion",
            "intermittent mild discomfort and no functional limitation",
            "slight ache after activity that settles with rest",
        ],
        docs: &[
            ("overview", "Normal study overview", "A normal musculoskeletal examination shows full painless range of motion, no swelling, no bone tenderness and preserved strength, so mild aches after exercise usually reflect soft tissue strain. Reassurance is appropriate."),
            ("imaging", "Normal CT findings", "A normal computed tomography study shows intact cortical outlines, preserved joint spaces, normal bone density and no fracture, erosion, lesion or soft tissue mass. Incidental findings are common."),
            ("treatment", "Soft tissue strain treatment", "Treatment of a simple soft tissue strain without structural injury consists of relative rest, ice, simple analgesics and a graded return to normal activity over a few weeks. Imaging is rarely needed."),
            ("management", "Normal findings management", "Long-term management after normal findings involves activity modification, sensible training progression and review only if new pain, swelling or weakness develops. Most strains resolve completely."),
            ("prevention", "Injury prevention", "Injury prevention for active adults includes warm-up routines, progressive loading, adequate recovery between sessions and appropriate footwear to reduce strain on muscles and joints. Fitness improves resilience."),
        ],
    },
];

/// (pattern, canonical, type)
const LEXICON: &[(&str, &str, EntityType)] = &[
    ("fracture", "fracture", EntityType::Condition),
    ("fractures", "fracture", EntityType::Condition),
    ("arthritis", "arthritis", EntityType::Condition),
    ("rheumatoid disease", "arthritis", EntityType::Condition),
    ("tumor", "tumor", EntityType::Condition),
    ("osteosarcoma", "tumor", EntityType::Condition),
    ("dislocation", "dislocation", EntityType::Condition),
    ("degenerative disease", "degenerative disease", EntityType::Condition),
    ("osteoarthritis", "degenerative disease", EntityType::Condition),
    ("lumbar spondylosis", "degenerative disease", EntityType::Condition),
    ("soft tissue strain", "soft tissue strain", EntityType::Condition),
    ("distal radius", "distal radius", EntityType::Anatomy),
    ("wrist", "wrist", EntityType::Anatomy),
    ("shoulder", "shoulder", EntityType::Anatomy),
    ("knee", "knee", EntityType::Anatomy),
    ("hip", "hip", EntityType::Anatomy),
    ("lumbar spine", "lumbar spine", EntityType::Anatomy),
    ("spine", "lumbar spine", EntityType::Anatomy),
    ("femur", "femur", EntityType::Anatomy),
    ("synovial joints", "synovial joint", EntityType::Anatomy),
    ("swelling", "swelling", EntityType::Symptom),
    ("night pain", "night pain", EntityType::Symptom),
    ("morning stiffness", "morning stiffness", EntityType::Symptom),
    ("deformity", "deformity", EntityType::Symptom),
    ("synovitis", "synovitis", EntityType::Symptom),
    ("crepitus", "crepitus", EntityType::Symptom),
    ("instability", "instability", EntityType::Symptom),
    ("mass", "mass", EntityType::Symptom),
    ("computed tomography", "computed tomography", EntityType::Procedure),
    ("biopsy", "biopsy", EntityType::Procedure),
    ("closed reduction", "closed reduction", EntityType::Treatment),
    ("cast immobilization", "cast immobilization", EntityType::Treatment),
    ("internal fixation", "internal fixation", EntityType::Treatment),
    ("physiotherapy", "physiotherapy", EntityType::Treatment),
    ("chemotherapy", "chemotherapy", EntityType::Treatment),
    ("wide surgical resection", "resection", EntityType::Treatment),
    ("joint replacement", "joint replacement", EntityType::Treatment),
    ("total joint replacement", "joint replacement", EntityType::Treatment),
    ("methotrexate", "disease-modifying drugs", EntityType::Treatment),
    ("disease-modifying antirheumatic drugs", "disease-modifying drugs", EntityType::Treatment),
    ("joint injection", "joint injection", EntityType::Treatment),
    ("corticosteroid injection", "joint injection", EntityType::Treatment),
    ("sling immobilization", "sling immobilization", EntityType::Treatment),
];

const SEXES: &[&str] = &["female", "male"];
const OCCUPATIONS: &[&str] = &[
    "teacher", "builder", "nurse", "office worker", "farmer", "student", "retired engineer", "chef",
];

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic"));
    fs::create_dir_all(out.join("cases"))?;

    let mut corpus = String::new();
    for class in CLASSES {
        for (suffix, title, text) in class.docs {
            let doc = Document {
                doc_id: format!("{}-{suffix}", class.label.replace('_', "-")),
                title: title.to_string(),
                source: "Synthetic orthopedic reference".to_string(),
                text: text.to_string(),
            };
            corpus.push_str(&serde_json::to_string(&doc)?);
            corpus.push('\n');
        }
    }
    fs::write(out.join("corpus.jsonl"), corpus)?;

    let mut lexicon = String::new();
    for (pattern, canonical, ty) in LEXICON {
        let rel_hints = match ty {
            EntityType::Treatment => vec![RelType::Treats],
            EntityType::Anatomy => vec![RelType::LocatedIn],
            EntityType::Symptom => vec![RelType::Indicates],
            _ => vec![],
        };
        let entry = LexiconEntry {
            pattern: pattern.to_string(),
            canonical_name: canonical.to_string(),
            entity_type: *ty,
            rel_hints,
        };
        lexicon.push_str(&serde_json::to_string(&entry)?);
        lexicon.push('\n');
    }
    fs::write(out.join("lexicon.jsonl"), lexicon)?;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let prototypes: Vec<Vec<f64>> = CLASSES
        .iter()
        .map(|_| (0..D).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let noise = Normal::new(0.0, NOISE_SD)?;
    let mut ratings: BTreeMap<String, u8> = BTreeMap::new();
    let mut n = 0;
    for i in 0..CASES_PER_CLASS {
        for (c, class) in CLASSES.iter().enumerate() {
            n += 1;
            let case_id = format!("case-{n:03}");
            let patches = (0..P)
                .map(|_| prototypes[c].iter().map(|&m| round4(m + noise.sample(&mut rng))).collect())
                .collect();
            let case = CaseRecord {
                case_id: case_id.clone(),
                demographics: Demographics {
                    age: rng.random_range(18..85),
                    sex: SEXES[rng.random_range(0..SEXES.len())].to_string(),
                    occupation: OCCUPATIONS[rng.random_range(0..OCCUPATIONS.len())].to_string(),
                },
                history: class.histories[i % class.histories.len()].to_string(),
                complaints: class.complaints[(i / 2 + i) % class.complaints.len()].to_string(),
                image_patches: patches,
                ground_truth: Some(class.label.to_string()),
            };
            case.save(out.join("cases").join(format!("{case_id}.json")))?;
            if n % 3 == 0 {
                ratings.insert(case_id, rng.random_range(3..=5));
            }
        }
    }
    fs::write(out.join("ratings.json"), serde_json::to_string_pretty(&ratings)? + "\n")?;
    println!("wrote {n} cases to {}", out.display());
    Ok(())
}
