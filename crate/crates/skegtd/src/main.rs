fn main() {
    println!("skegtd cli placeholder");
}
