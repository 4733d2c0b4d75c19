#pragma once

#include "voice_ehr/domain.hpp"

namespace voice_ehr {

/// Session-level inclusion pass over a frozen record:
///   FewerThanTwoRecordings  fewer than 2 finalized samples
///   UntranscribableAudio    at least one speech sample (policy Always) and every one of
///                           them failed the quality gate or has no non-blank transcript
///   MissingPages1to5        a survey page 1-5 required for the cohort has no answers
/// Pure: the same record and decided_at always give the same decision.
InclusionDecision curate(const SessionRecord& record, Timestamp decided_at);

}  // namespace voice_ehr
