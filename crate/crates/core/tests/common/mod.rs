//! Frozen five-query evaluation fixture with hand-computed expectations.
//!
//! Grades reach 2, so the binary metrics count only grade 2 as relevant and
//! grade 1 documents behave as non-relevant. q5 has no grade-2 document, so
//! MAP, MRR and recall are undefined there while NDCG is not. q6 appears
//! only in the run.

#![allow(dead_code)]

pub const QRELS: &str = "\
q1 0 a 2
q1 0 b 1
q1 0 c 2
q1 0 d 0
q2 0 e 2
q3 0 f 1
q3 0 g 2
q3 0 h 2
q4 0 i 2
q4 0 j 2
q5 0 k 1
";

pub const RUN: &str = "\
q1 Q0 a 1 5.0 fx
q1 Q0 b 2 4.0 fx
q1 Q0 x 3 3.0 fx
q1 Q0 c 4 2.0 fx
q1 Q0 d 5 1.0 fx
q2 Q0 y 1 3.0 fx
q2 Q0 z 2 2.0 fx
q2 Q0 e 3 1.0 fx
q3 Q0 h 1 4.0 fx
q3 Q0 f 2 3.0 fx
q3 Q0 w 3 2.0 fx
q3 Q0 g 4 1.0 fx
q4 Q0 u 1 3.0 fx
q4 Q0 v 2 2.0 fx
q4 Q0 i 3 1.0 fx
q5 Q0 k 1 1.0 fx
q6 Q0 a 1 1.0 fx
";

pub struct Expected {
    pub map: f64,
    pub ndcg10: f64,
    pub mrr10: f64,
    pub recall: f64,
    /// MAP when grade 1 also counts as relevant.
    pub map_grade1: f64,
}

pub fn expected() -> Expected {
    let l3 = 3f64.log2();
    let l5 = 5f64.log2();
    // AP: q1 (1 + 2/4)/2, q2 1/3, q3 (1 + 2/4)/2, q4 (1/3)/2
    let map = (0.75 + 1.0 / 3.0 + 0.75 + 1.0 / 6.0) / 4.0;
    let mrr10 = (1.0 + 1.0 / 3.0 + 1.0 + 1.0 / 3.0) / 4.0;
    let recall = (1.0 + 1.0 + 1.0 + 0.5) / 4.0;
    // linear gain, discount 1/log2(rank + 1)
    let q1 = (2.0 + 1.0 / l3 + 2.0 / l5) / (2.0 + 2.0 / l3 + 0.5);
    let q2 = 1.0 / 2.0;
    let q3 = (2.0 + 1.0 / l3 + 2.0 / l5) / (2.0 + 2.0 / l3 + 0.5);
    let q4 = 1.0 / (2.0 + 2.0 / l3);
    let q5 = 1.0;
    // with grade 1 relevant: q1 (1 + 1 + 3/4)/3, q3 (1 + 1 + 3/4)/3, q5 1
    let map_grade1 = (2.75 / 3.0 + 1.0 / 3.0 + 2.75 / 3.0 + 1.0 / 6.0 + 1.0) / 5.0;
    Expected {
        map,
        ndcg10: (q1 + q2 + q3 + q4 + q5) / 5.0,
        mrr10,
        recall,
        map_grade1,
    }
}
