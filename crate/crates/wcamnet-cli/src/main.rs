fn main() {
    println!("wcamnet");
}
