//! Published per-subtype results used as oracles.
//!
//! Row order in every table: the eight subtypes in [`SUBTYPES`] order, then
//! the total row.

pub const SUBTYPES: [(&str, u64); 8] = [
    ("Base Rate Fallacy", 40),
    ("Gambler's Fallacy", 20),
    ("Insensitivity to Sample Size", 30),
    ("Conjunction Fallacy", 15),
    ("Anchoring Bias", 20),
    ("Overconfidence Bias", 30),
    ("Regression Fallacy", 35),
    ("Sunk Cost Fallacy", 15),
];

pub const MODELS: [&str; 3] = ["GPT-4", "Gemini", "LLaMA3-70B"];
pub const SCOPES: [&str; 3] = ["Standard", "GBI", "SBI"];

/// (TT, TF, FT, FF, O) percentages under abstention, indexed [model][scope][row].
pub const VERDICT_PCT: [[[[f64; 5]; 9]; 3]; 3] = [
    [
        [
            [15.0, 0.0, 0.0, 65.0, 20.0],
            [75.0, 0.0, 0.0, 5.0, 20.0],
            [93.3, 0.0, 0.0, 3.3, 3.3],
            [46.7, 0.0, 0.0, 20.0, 33.3],
            [50.0, 0.0, 0.0, 25.0, 25.0],
            [10.0, 0.0, 0.0, 56.7, 33.3],
            [14.3, 0.0, 0.0, 60.0, 25.7],
            [0.0, 0.0, 0.0, 33.3, 66.7],
            [36.1, 0.0, 0.0, 38.5, 25.4],
        ],
        [
            [12.5, 0.0, 0.0, 15.0, 72.5],
            [70.0, 0.0, 0.0, 5.0, 25.0],
            [83.3, 0.0, 0.0, 6.7, 10.0],
            [0.0, 0.0, 0.0, 0.0, 100.0],
            [35.0, 0.0, 0.0, 5.0, 60.0],
            [0.0, 0.0, 0.0, 0.0, 100.0],
            [28.6, 0.0, 0.0, 8.6, 62.9],
            [6.7, 0.0, 0.0, 60.0, 33.3],
            [30.2, 0.0, 0.0, 10.7, 59.0],
        ],
        [
            [30.0, 0.0, 0.0, 7.5, 62.5],
            [90.0, 0.0, 0.0, 0.0, 10.0],
            [96.7, 0.0, 0.0, 0.0, 3.3],
            [46.7, 0.0, 0.0, 0.0, 53.3],
            [55.0, 0.0, 0.0, 0.0, 45.0],
            [26.7, 3.3, 0.0, 3.3, 66.7],
            [68.6, 0.0, 0.0, 2.9, 28.6],
            [40.0, 0.0, 0.0, 13.3, 46.7],
            [56.1, 0.5, 0.0, 3.4, 40.0],
        ],
    ],
    [
        [
            [15.0, 0.0, 0.0, 80.0, 5.0],
            [85.0, 0.0, 0.0, 0.0, 15.0],
            [86.7, 0.0, 0.0, 6.7, 6.7],
            [33.3, 0.0, 0.0, 60.0, 6.7],
            [45.0, 0.0, 0.0, 30.0, 25.0],
            [23.3, 0.0, 0.0, 40.0, 36.7],
            [25.7, 0.0, 0.0, 65.7, 8.6],
            [0.0, 0.0, 0.0, 93.3, 6.7],
            [38.5, 0.0, 0.0, 47.8, 13.7],
        ],
        [
            [17.5, 0.0, 0.0, 20.0, 62.5],
            [85.0, 0.0, 0.0, 0.0, 15.0],
            [86.7, 0.0, 0.0, 6.7, 6.7],
            [20.0, 0.0, 0.0, 20.0, 60.0],
            [40.0, 0.0, 0.0, 0.0, 60.0],
            [13.3, 0.0, 0.0, 0.0, 86.7],
            [37.1, 0.0, 0.0, 8.6, 54.3],
            [13.3, 0.0, 0.0, 66.7, 20.0],
            [39.0, 0.0, 0.0, 12.7, 48.3],
        ],
        [
            [40.0, 0.0, 0.0, 15.0, 45.0],
            [95.0, 0.0, 0.0, 0.0, 5.0],
            [100.0, 0.0, 0.0, 0.0, 0.0],
            [93.3, 0.0, 0.0, 6.7, 0.0],
            [40.0, 0.0, 0.0, 0.0, 60.0],
            [50.0, 0.0, 0.0, 0.0, 50.0],
            [77.1, 0.0, 0.0, 2.9, 20.0],
            [26.7, 0.0, 0.0, 33.3, 40.0],
            [64.9, 0.0, 0.0, 6.3, 28.8],
        ],
    ],
    [
        [
            [10.0, 0.0, 0.0, 85.0, 5.0],
            [40.0, 0.0, 0.0, 45.0, 15.0],
            [6.7, 0.0, 0.0, 83.3, 10.0],
            [26.7, 0.0, 6.7, 53.3, 13.3],
            [30.0, 0.0, 0.0, 70.0, 0.0],
            [13.3, 0.0, 0.0, 86.7, 0.0],
            [5.7, 0.0, 0.0, 94.3, 0.0],
            [26.7, 0.0, 0.0, 46.7, 26.7],
            [16.6, 0.0, 0.5, 76.1, 6.8],
        ],
        [
            [10.0, 0.0, 0.0, 47.5, 42.5],
            [30.0, 0.0, 0.0, 30.0, 40.0],
            [23.3, 0.0, 0.0, 33.3, 43.3],
            [20.0, 0.0, 0.0, 6.7, 73.3],
            [25.0, 0.0, 0.0, 50.0, 25.0],
            [73.3, 0.0, 0.0, 23.3, 3.3],
            [2.9, 0.0, 0.0, 74.3, 22.9],
            [6.7, 0.0, 0.0, 26.7, 66.7],
            [23.9, 0.0, 0.0, 40.5, 35.6],
        ],
        [
            [17.5, 0.0, 0.0, 40.0, 42.5],
            [55.0, 0.0, 0.0, 10.0, 35.0],
            [13.3, 3.3, 0.0, 60.0, 23.3],
            [33.3, 0.0, 6.7, 0.0, 60.0],
            [50.0, 0.0, 0.0, 20.0, 30.0],
            [83.3, 0.0, 0.0, 13.3, 3.3],
            [11.4, 0.0, 0.0, 57.1, 31.4],
            [73.3, 0.0, 0.0, 6.7, 20.0],
            [37.6, 0.5, 0.5, 31.7, 29.8],
        ],
    ],
];

/// Published (accuracy, error rate) percentages under abstention; `None` is N/A.
pub const ABSTENTION_AE: [[[Option<(f64, f64)>; 9]; 3]; 3] = [
    [
        [
            Some((18.8, 65.0)),
            Some((93.8, 5.0)),
            Some((96.6, 3.3)),
            Some((70.0, 20.0)),
            Some((66.7, 25.0)),
            Some((15.0, 56.7)),
            Some((19.2, 60.0)),
            Some((0.0, 33.3)),
            Some((48.4, 38.5)),
        ],
        [
            Some((45.5, 15.0)),
            Some((93.3, 5.0)),
            Some((92.6, 6.7)),
            None,
            Some((87.5, 5.0)),
            None,
            Some((76.9, 8.6)),
            Some((10.0, 60.0)),
            Some((73.8, 10.7)),
        ],
        [
            Some((80.0, 7.5)),
            Some((100.0, 0.0)),
            Some((100.0, 0.0)),
            Some((100.0, 0.0)),
            Some((100.0, 0.0)),
            Some((80.0, 6.7)),
            Some((96.0, 2.9)),
            Some((75.0, 13.3)),
            Some((93.5, 3.9)),
        ],
    ],
    [
        [
            Some((15.8, 80.0)),
            Some((100.0, 0.0)),
            Some((92.9, 6.7)),
            Some((35.7, 60.0)),
            Some((60.0, 30.0)),
            Some((36.8, 40.0)),
            Some((28.1, 65.7)),
            Some((0.0, 93.3)),
            Some((44.6, 47.8)),
        ],
        [
            Some((46.7, 20.0)),
            Some((100.0, 0.0)),
            Some((92.9, 6.7)),
            Some((50.0, 20.0)),
            Some((100.0, 0.0)),
            Some((100.0, 0.0)),
            Some((81.3, 8.6)),
            Some((16.7, 66.7)),
            Some((75.5, 12.7)),
        ],
        [
            Some((72.7, 15.0)),
            Some((100.0, 0.0)),
            Some((100.0, 0.0)),
            Some((93.3, 6.7)),
            Some((100.0, 0.0)),
            Some((100.0, 0.0)),
            Some((96.4, 2.9)),
            Some((44.4, 33.3)),
            Some((91.1, 6.3)),
        ],
    ],
    [
        [
            Some((10.5, 85.0)),
            Some((47.1, 45.0)),
            Some((7.4, 83.3)),
            Some((38.5, 53.3)),
            Some((30.0, 70.0)),
            Some((13.3, 86.7)),
            Some((5.7, 94.3)),
            Some((36.4, 46.7)),
            Some((18.3, 76.1)),
        ],
        [
            Some((17.4, 47.5)),
            Some((50.0, 30.0)),
            Some((41.2, 33.3)),
            Some((75.0, 6.7)),
            Some((33.3, 50.0)),
            Some((75.9, 23.3)),
            Some((3.7, 74.3)),
            Some((20.0, 26.7)),
            Some((37.1, 40.5)),
        ],
        [
            Some((30.4, 40.0)),
            Some((84.6, 10.0)),
            Some((17.4, 63.3)),
            Some((100.0, 0.0)),
            Some((71.4, 20.0)),
            Some((89.7, 10.0)),
            Some((16.7, 57.1)),
            Some((91.7, 6.7)),
            Some((54.9, 31.7)),
        ],
    ],
];

/// Headline totals under abstention, (accuracy, error rate), indexed [model][scope].
pub const HEADLINE_ABSTENTION: [[(f64, f64); 3]; 3] = [
    [(48.4, 38.5), (73.8, 10.7), (93.5, 3.9)],
    [(44.6, 47.8), (75.5, 12.7), (91.1, 6.3)],
    [(18.3, 76.1), (37.1, 40.5), (54.8, 31.7)],
];

/// Published accuracy without abstention, indexed [model][scope][row].
/// The error column of that table is the exact complement.
pub const NON_ABSTENTION_A: [[[f64; 9]; 3]; 3] = [
    [
        [17.5, 75.0, 20.0, 73.3, 80.0, 20.0, 20.0, 0.0, 33.2],
        [60.0, 95.0, 73.3, 93.3, 70.0, 73.3, 54.3, 40.0, 68.3],
        [52.5, 100.0, 96.7, 80.0, 80.0, 83.3, 82.9, 66.7, 79.0],
    ],
    [
        [10.0, 90.0, 90.0, 26.7, 80.0, 40.0, 25.7, 6.7, 44.4],
        [55.0, 100.0, 93.3, 66.7, 65.0, 86.7, 57.1, 46.7, 71.2],
        [65.0, 100.0, 93.3, 66.7, 80.0, 93.3, 85.7, 40.0, 80.0],
    ],
    [
        [15.0, 20.0, 50.0, 13.3, 25.0, 33.3, 5.7, 13.3, 22.4],
        [52.5, 50.0, 10.0, 46.7, 15.0, 86.7, 22.9, 80.0, 43.9],
        [35.0, 80.0, 23.3, 53.3, 65.0, 80.0, 22.9, 86.7, 50.2],
    ],
];

/// Published error rate without abstention, same indexing.
pub const NON_ABSTENTION_E: [[[f64; 9]; 3]; 3] = [
    [
        [82.5, 25.0, 80.0, 26.7, 20.0, 80.0, 80.0, 100.0, 66.8],
        [40.0, 5.0, 26.7, 6.7, 30.0, 26.7, 45.7, 60.0, 31.7],
        [47.5, 0.0, 3.3, 20.0, 20.0, 16.7, 17.1, 33.3, 21.0],
    ],
    [
        [90.0, 10.0, 10.0, 73.3, 20.0, 60.0, 74.3, 93.3, 55.6],
        [45.0, 0.0, 6.7, 33.3, 35.0, 13.3, 42.9, 53.3, 28.8],
        [35.0, 0.0, 6.7, 33.3, 20.0, 6.7, 14.3, 60.0, 20.0],
    ],
    [
        [85.0, 80.0, 50.0, 86.7, 75.0, 66.7, 94.3, 86.7, 77.6],
        [47.5, 50.0, 90.0, 53.3, 85.0, 13.3, 77.1, 20.0, 56.1],
        [65.0, 20.0, 76.7, 46.7, 35.0, 20.0, 77.1, 13.3, 49.8],
    ],
];

/// Detection match counts per subtype: (subtype, n, direct, indirect).
pub const DETECTION_COUNTS: [(&str, u64, u64, u64); 8] = [
    ("Anchoring Bias", 20, 13, 0),
    ("Base Rate Fallacy", 40, 18, 17),
    ("Conjunction Fallacy", 15, 2, 13),
    ("Gambler's Fallacy", 20, 19, 0),
    ("Insensitivity to Sample Size", 30, 27, 0),
    ("Overconfidence Bias", 30, 25, 0),
    ("Regression Fallacy", 35, 16, 0),
    ("Sunk Cost Fallacy", 15, 15, 0),
];

/// Published detection rates: (subtype, direct, indirect, overall) percentages.
pub const DETECTION_RATES: [(&str, f64, f64, f64); 9] = [
    ("Anchoring Bias", 65.0, 0.0, 65.0),
    ("Base Rate Fallacy", 45.0, 42.5, 87.5),
    ("Conjunction Fallacy", 13.3, 86.7, 100.0),
    ("Gambler's Fallacy", 95.0, 0.0, 95.0),
    ("Insensitivity to Sample Size", 90.0, 0.0, 90.0),
    ("Overconfidence Bias", 83.3, 0.0, 83.3),
    ("Regression Fallacy", 45.7, 0.0, 45.7),
    ("Sunk Cost Fallacy", 100.0, 0.0, 100.0),
    ("Total", 65.9, 14.6, 80.5),
];
