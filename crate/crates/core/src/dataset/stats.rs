use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Dialogue, Split, SplitSpec};
use crate::paralinguistics::Gender;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub dialogues: usize,
    pub utterances: usize,
    pub seconds: f64,
    pub male: usize,
    pub female: usize,
}

impl SplitStats {
    pub fn hours(&self) -> f64 {
        self.seconds / 3600.0
    }

    pub fn mean_utterance_seconds(&self) -> f64 {
        if self.utterances == 0 {
            0.0
        } else {
            self.seconds / self.utterances as f64
        }
    }

    fn add(&mut self, other: &SplitStats) {
        self.dialogues += other.dialogues;
        self.utterances += other.utterances;
        self.seconds += other.seconds;
        self.male += other.male;
        self.female += other.female;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub splits: BTreeMap<Split, SplitStats>,
    /// Dialogues the split spec does not mention.
    pub unassigned: SplitStats,
    pub total: SplitStats,
}

impl DatasetStats {
    pub fn split(&self, split: Split) -> SplitStats {
        self.splits.get(&split).copied().unwrap_or_default()
    }
}

fn dialogue_stats(d: &Dialogue) -> SplitStats {
    let mut s = SplitStats { dialogues: 1, ..Default::default() };
    for u in &d.utterances {
        s.utterances += 1;
        s.seconds += u.duration();
        match u.annotation.map(|a| a.gender) {
            Some(Gender::Male) => s.male += 1,
            Some(Gender::Female) => s.female += 1,
            None => {}
        }
    }
    s
}

pub fn compute_stats(dialogues: &[Dialogue], spec: &SplitSpec) -> DatasetStats {
    let mut stats = DatasetStats {
        splits: Split::ALL.iter().map(|&s| (s, SplitStats::default())).collect(),
        ..Default::default()
    };
    for d in dialogues {
        let ds = dialogue_stats(d);
        match spec.get(&d.dialogue_id) {
            Some(split) => stats.splits.get_mut(&split).expect("all splits present").add(&ds),
            None => stats.unassigned.add(&ds),
        }
    }
    let mut total = stats.unassigned;
    for s in stats.splits.values() {
        total.add(s);
    }
    stats.total = total;
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixture::reference_corpus;

    #[test]
    fn empty_manifest_is_all_zeros() {
        let spec = SplitSpec { seed: 0, assignments: BTreeMap::new() };
        let s = compute_stats(&[], &spec);
        assert_eq!(s.total, SplitStats::default());
        for split in Split::ALL {
            assert_eq!(s.split(split), SplitStats::default());
        }
        assert_eq!(s.total.mean_utterance_seconds(), 0.0);
    }

    #[test]
    fn reference_fixture_matches_reference_shape() {
        let (dialogues, spec) = reference_corpus();
        let s = compute_stats(&dialogues, &spec);
        let train = s.split(Split::Train);
        let valid = s.split(Split::Valid);
        let test = s.split(Split::Test);
        assert_eq!((train.dialogues, valid.dialogues, test.dialogues), (913, 110, 97));
        assert_eq!((train.utterances, valid.utterances, test.utterances), (25624, 3145, 2640));
        let h = |x: SplitStats| format!("{:.1}", x.hours());
        assert_eq!((h(train), h(valid), h(test)), ("17.5".into(), "2.1".into(), "1.8".into()));
        assert_eq!((s.total.male, s.total.female), (12549, 18860));
        assert_eq!(format!("{:.2}", s.total.mean_utterance_seconds()), "2.46");
        assert_eq!(s.unassigned, SplitStats::default());
        assert_eq!(s.total.utterances, train.utterances + valid.utterances + test.utterances);
    }
}
