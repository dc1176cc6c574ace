//! Scheduled acquisition of roadside webcam frames and weather-station
//! readings into a date-partitioned on-disk archive.
