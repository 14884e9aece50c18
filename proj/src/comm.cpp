#include "vfl/comm.hpp"

#include <stdexcept>

namespace vfl {

std::string to_string(Direction d) {
  return d == Direction::Upload ? "upload" : "download";
}

std::string to_string(PayloadRole r) {
  if (r == PayloadRole::RepsOverlap) return "reps_overlap";
  if (r == PayloadRole::RepsUnaligned) return "reps_unaligned";
  if (r == PayloadRole::PartialGrads) return "partial_grads";
  if (r == PayloadRole::ClassCount) return "class_count";
  if (r == PayloadRole::InclusionProbs) return "inclusion_probs";
  if (r == PayloadRole::LogitsOrMisc) return "logits_or_misc";
  throw std::invalid_argument("to_string: unknown payload role");
}

CommLedger::CommLedger(std::size_t bytes_per_scalar) : bytes_per_scalar_(bytes_per_scalar) {
  if (bytes_per_scalar == 0)
    throw std::invalid_argument("CommLedger: bytes_per_scalar must be positive");
}

void CommLedger::record_upload(int client, PayloadRole role, std::size_t scalar_count) {
  messages_.push_back(Message{Direction::Upload, client, kServerId, role, scalar_count});
}

void CommLedger::record_download(int client, PayloadRole role, std::size_t scalar_count) {
  messages_.push_back(Message{Direction::Download, kServerId, client, role, scalar_count});
}

std::size_t CommLedger::total_scalars() const {
  std::size_t n = 0;
  for (const Message& m : messages_) n += m.scalar_count;
  return n;
}

std::size_t CommLedger::total_bytes() const { return total_scalars() * bytes_per_scalar_; }

std::size_t CommLedger::messages_for_client(int client) const {
  std::size_t n = 0;
  for (const Message& m : messages_)
    if (m.sender == client || m.receiver == client) ++n;
  return n;
}

CommSummary comm_summary(const CommLedger& ledger) {
  CommSummary s;
  for (const Message& m : ledger.messages()) {
    const int client = (m.direction == Direction::Upload) ? m.sender : m.receiver;
    s.per_client_messages[client] += 1;
    if (m.direction == Direction::Upload)
      s.uploads_per_client[client] += 1;
    else
      s.downloads_per_client[client] += 1;
    s.scalars_per_role[to_string(m.role)] += m.scalar_count;
    s.total_scalars += m.scalar_count;
  }
  s.total_messages = ledger.total_messages();
  s.total_bytes = s.total_scalars * ledger.bytes_per_scalar();
  s.total_mb = static_cast<double>(s.total_bytes) / (1024.0 * 1024.0);
  return s;
}

}  // namespace vfl
