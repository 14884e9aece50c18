#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vfl {

// Party ids: clients are 0..K-1, the server is kServerId.
inline constexpr int kServerId = -1;

enum class Direction { Upload, Download };

enum class PayloadRole {
  RepsOverlap,
  RepsUnaligned,
  PartialGrads,
  ClassCount,
  InclusionProbs,
  LogitsOrMisc,
};

std::string to_string(Direction d);
std::string to_string(PayloadRole r);

// One cross-party transfer. scalar_count is the payload's element count;
// cost accounting multiplies by bytes_per_scalar, it never inspects values.
struct Message {
  Direction direction = Direction::Upload;
  int sender = 0;
  int receiver = kServerId;
  PayloadRole role = PayloadRole::LogitsOrMisc;
  std::size_t scalar_count = 0;
};

// Append-only record of every transfer in a run.
class CommLedger {
 public:
  explicit CommLedger(std::size_t bytes_per_scalar = 4);

  void record_upload(int client, PayloadRole role, std::size_t scalar_count);
  void record_download(int client, PayloadRole role, std::size_t scalar_count);

  const std::vector<Message>& messages() const { return messages_; }
  std::size_t bytes_per_scalar() const { return bytes_per_scalar_; }

  std::size_t total_messages() const { return messages_.size(); }
  std::size_t total_scalars() const;
  std::size_t total_bytes() const;
  // Messages where the client is sender or receiver.
  std::size_t messages_for_client(int client) const;

 private:
  std::vector<Message> messages_;
  std::size_t bytes_per_scalar_;
};

struct CommSummary {
  std::map<int, std::size_t> per_client_messages;
  std::map<int, std::size_t> uploads_per_client;
  std::map<int, std::size_t> downloads_per_client;
  std::map<std::string, std::size_t> scalars_per_role;
  std::size_t total_messages = 0;
  std::size_t total_scalars = 0;
  std::size_t total_bytes = 0;
  double total_mb = 0.0;  // bytes / 2^20
};

CommSummary comm_summary(const CommLedger& ledger);

}  // namespace vfl
